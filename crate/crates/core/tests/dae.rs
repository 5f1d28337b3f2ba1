mod common;

use common::*;
use interpmor::dae::{additive_decomposition, dae_reduce, spectral_projectors};
use interpmor::interp::{interpolatory_reduce, verify_interpolation, BasisMode, TangentData};
use interpmor::{models, DescriptorSystem, RMat, C64};

fn data(seed: u64, m: usize, p: usize) -> TangentData {
    let mut g = rng(seed);
    let s = cx(0.4, 1.3);
    let (r, l) = (random_cvec(&mut g, m), random_cvec(&mut g, p));
    TangentData::bitangential(
        vec![s, s.conj(), c(0.8), c(2.5)],
        vec![r.clone(), r.map(|z| z.conj()), random_rvec(&mut g, m), random_rvec(&mut g, m)],
        vec![l.clone(), l.map(|z| z.conj()), random_rvec(&mut g, p), random_rvec(&mut g, p)],
    )
    .unwrap()
}

#[test]
fn projectors_are_complementary_and_deflating() {
    for seed in 0..4 {
        let sys = models::random_index1(seed, 10, 6, 2, 2);
        let sp = spectral_projectors(&sys).unwrap();
        let id = RMat::identity(10, 10);
        assert_eq!(sp.index, 1);
        assert!((&sp.p_l * &sp.p_l - &sp.p_l).norm() < 1e-9 * sp.p_l.norm());
        assert!((&sp.p_r * &sp.p_r - &sp.p_r).norm() < 1e-9 * sp.p_r.norm());
        // P_l E = E P_r and P_l A = A P_r
        assert!((&sp.p_l * sys.e() - sys.e() * &sp.p_r).norm() < 1e-9 * sys.e().norm() * sp.p_r.norm());
        assert!((&sp.p_l * sys.a() - sys.a() * &sp.p_r).norm() < 1e-9 * sys.a().norm() * sp.p_r.norm());
        // rank of the finite projector is the number of finite eigenvalues
        let tr = sp.p_r.trace();
        assert!((tr - 6.0).abs() < 1e-8, "{tr}");
        // infinite part annihilated by E restricted to the complement
        let q = &id - &sp.p_r;
        assert!((sys.e() * &q).norm() < 1e-8 * sys.e().norm());
    }
}

#[test]
fn polynomial_part_is_high_frequency_limit() {
    let sys = models::random_index1(3, 9, 5, 2, 1);
    let dec = additive_decomposition(&sys).unwrap();
    assert_eq!(dec.degree(), 0);
    let far = transfer_explicit(&sys, cx(0.0, 1e9));
    let p = dec.eval_poly(cx(0.0, 1e9));
    assert!((&far - &p).norm() < 1e-7 * p.norm().max(1e-3));
    for s in probes(6) {
        let h = transfer_explicit(&sys, s);
        assert!((dec.eval(s).unwrap() - &h).norm() < 1e-9 * h.norm());
    }
    // strictly proper remainder decays
    let g = dec.eval_g(cx(0.0, 1e8)).unwrap();
    assert!(g.norm() < 1e-6);
}

#[test]
fn reduction_preserves_polynomial_part() {
    for seed in 0..5 {
        let sys = models::random_index1(seed + 10, 12, 7, 2, 2);
        let td = data(seed, 2, 2);
        let red = dae_reduce(&sys, &td).unwrap();
        assert!(red.infinite_dim > 0);
        assert_eq!(red.finite_order, 4);
        let full = additive_decomposition(&sys).unwrap();
        let redd = additive_decomposition(&red.reduced).unwrap();
        for s in probes(10) {
            let a = full.eval_poly(s);
            assert!((&a - redd.eval_poly(s)).norm() < 1e-9 * a.norm().max(1.0), "seed {seed}");
        }
        let w = cx(0.0, 1e6);
        let gap = (transfer_explicit(&sys, w) - red.reduced.transfer(w).unwrap()).norm();
        assert!(gap < 1e-5, "seed {seed}: {gap}");
        let rep = verify_interpolation(&sys, &red.reduced, &td).unwrap();
        assert!(rep.all_below(1e-8), "seed {seed}: {}", rep.max_relative);
    }
}

#[test]
fn naive_projection_misses_polynomial_part() {
    let sys = models::random_index1(21, 12, 7, 1, 1);
    let td = data(2, 1, 1);
    let naive = interpolatory_reduce(&sys, &td, BasisMode::Orthonormal);
    let w = cx(0.0, 1e6);
    let h = transfer_explicit(&sys, w);
    if let Ok(naive) = naive {
        if let Ok(hn) = naive.transfer(w) {
            // interpolation alone gives a wrong limit at infinity
            assert!((&h - hn).norm() > 1e-6 * h.norm());
        }
    }
    let red = dae_reduce(&sys, &td).unwrap();
    assert!((&h - red.reduced.transfer(w).unwrap()).norm() < 1e-5 * h.norm().max(1.0));
}

#[test]
fn nonsingular_e_has_no_infinite_part() {
    let sys = models::random_stable(2, 6, 1, 1);
    let sp = spectral_projectors(&sys).unwrap();
    assert_eq!(sp.index, 0);
    assert!((sp.p_r - RMat::identity(6, 6)).norm() < 1e-10);
    let dec = additive_decomposition(&sys).unwrap();
    assert!(dec.eval_poly(C64::new(1.0, 1.0)).norm() < 1e-12);
}

#[test]
fn polynomial_degree_one() {
    // index 2 block [[0, 1], [0, 0]] with A = I gives P(s) = -c (N s) b
    let n = 3;
    let mut e = RMat::zeros(n, n);
    e[(0, 0)] = 1.0;
    e[(1, 2)] = 1.0;
    let mut a = RMat::identity(n, n);
    a[(0, 0)] = -2.0;
    let b = RMat::from_column_slice(n, 1, &[1.0, 0.0, 1.0]);
    let cm = RMat::from_row_slice(1, n, &[1.0, 1.0, 0.0]);
    let sys = DescriptorSystem::strictly_proper(e, a, b, cm).unwrap();
    let dec = additive_decomposition(&sys).unwrap();
    assert_eq!(dec.degree(), 1);
    for s in probes(4) {
        let h = transfer_explicit(&sys, s);
        assert!((dec.eval(s).unwrap() - &h).norm() < 1e-10 * h.norm());
        // 1/(s+2) - s
        let want = c(1.0) / (s + c(2.0)) - s;
        assert!((h[(0, 0)] - want).norm() < 1e-10 * want.norm());
    }
}
