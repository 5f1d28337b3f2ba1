mod common;

use common::*;
use interpmor::interp::{
    interpolation_bases, interpolatory_reduce, petrov_galerkin_reduce, reduce_with_feedthrough, three_state_tangent,
    verify_interpolation, BasisMode, ConditionKind, TangentData,
};
use interpmor::{models, CMat, CVec, MorError, RMat, C64};
use proptest::prelude::*;

#[test]
fn three_state_bases_and_reduced_matrices() {
    let sys = models::three_state_example();
    let data = three_state_tangent();
    let b = interpolation_bases(&sys, &data, BasisMode::Raw).unwrap();
    let (v, w): (Vec<f64>, Vec<f64>) = (b.v.iter().copied().collect(), b.w.iter().copied().collect());
    for (x, y) in v.iter().zip([-2.0, -1.0, 4.0]) {
        assert!((x - y).abs() < 1e-12);
    }
    for (x, y) in w.iter().zip([0.5, -1.0, 6.5]) {
        assert!((x - y).abs() < 1e-12);
    }
    let red = petrov_galerkin_reduce(&sys, &b.v, &b.w).unwrap();
    assert!((red.e()[(0, 0)] - 26.0).abs() < 1e-12);
    assert!((red.a()[(0, 0)] + 5.0).abs() < 1e-12);
    assert!((red.b()[(0, 0)] - 6.0).abs() < 1e-12 && (red.b()[(0, 1)] + 0.5).abs() < 1e-12);
    assert!((red.c()[(0, 0)] - 2.0).abs() < 1e-12 && (red.c()[(1, 0)] + 1.0).abs() < 1e-12);
}

#[test]
fn three_state_interpolated_values() {
    let sys = models::three_state_example();
    let data = three_state_tangent();
    let red = interpolatory_reduce(&sys, &data, BasisMode::Raw).unwrap();
    let z = c(0.0);
    let r = &data.right_dirs[0];
    let l = &data.left_dirs[0];
    let hr = red.transfer(z).unwrap() * r;
    assert!((hr[0] - c(2.0)).norm() < 1e-12 && (hr[1] + c(1.0)).norm() < 1e-12);
    let lh = l.transpose() * red.transfer(z).unwrap();
    assert!((lh[0] - c(6.0)).norm() < 1e-12 && (lh[1] + c(0.5)).norm() < 1e-12);
    let d = (l.transpose() * red.transfer_derivative(z).unwrap() * r)[(0, 0)];
    assert!((d + c(26.0)).norm() < 1e-12);
    // the orthonormal basis gives the same transfer function
    let red2 = interpolatory_reduce(&sys, &data, BasisMode::Orthonormal).unwrap();
    for s in probes(5) {
        assert!((red.transfer(s).unwrap() - red2.transfer(s).unwrap()).norm() < 1e-12);
    }
}

#[test]
fn three_state_full_matrix_interpolation() {
    let sys = models::three_state_example();
    let h0 = sys.transfer(c(0.0)).unwrap();
    let want = [[5.0 / 3.0, 1.0 / 6.0], [1.0, -1.0]];
    let dwant = [[-55.0 / 18.0, -71.0 / 36.0], [-8.0 / 3.0, -7.0 / 6.0]];
    let data = TangentData::full_matrix(&[c(0.0)], 2, 2).unwrap();
    let red = interpolatory_reduce(&sys, &data, BasisMode::Raw).unwrap();
    assert_eq!(red.order(), 2);
    let (hr, dhr) = (red.transfer(c(0.0)).unwrap(), red.transfer_derivative(c(0.0)).unwrap());
    for i in 0..2 {
        for j in 0..2 {
            assert!((h0[(i, j)] - c(want[i][j])).norm() < 1e-12);
            assert!((hr[(i, j)] - c(want[i][j])).norm() < 1e-12);
            assert!((dhr[(i, j)] - c(dwant[i][j])).norm() < 1e-12);
        }
    }
}

fn conj_closed(sys_m: usize, sys_p: usize, seed: u64, pairs: usize, reals: usize) -> TangentData {
    let mut g = rng(seed);
    let (mut pts, mut rd, mut ld) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..pairs {
        let s = cx(0.3 + 0.4 * k as f64, 1.0 + k as f64);
        let (r, l) = (random_cvec(&mut g, sys_m), random_cvec(&mut g, sys_p));
        pts.push(s);
        rd.push(r.clone());
        ld.push(l.clone());
        pts.push(s.conj());
        rd.push(r.map(|z| z.conj()));
        ld.push(l.map(|z| z.conj()));
    }
    for k in 0..reals {
        pts.push(c(0.5 + 1.7 * k as f64));
        rd.push(random_rvec(&mut g, sys_m));
        ld.push(random_rvec(&mut g, sys_p));
    }
    TangentData::bitangential(pts, rd, ld).unwrap()
}

#[test]
fn bitangential_hermite_on_random_systems() {
    for seed in 0..5 {
        let sys = models::random_descriptor(seed, 14, 2, 3);
        let data = conj_closed(2, 3, seed, 2, 2);
        let red = interpolatory_reduce(&sys, &data, BasisMode::Orthonormal).unwrap();
        assert_eq!(red.order(), 6);
        // real reduced model
        assert!(red.a().iter().all(|x| x.is_finite()));
        let rep = verify_interpolation(&sys, &red, &data).unwrap();
        assert!(rep.all_below(1e-9), "seed {seed}: {}", rep.max_relative);
        assert_eq!(rep.of_kind(ConditionKind::Hermite).count(), 6);
    }
}

#[test]
fn higher_order_moments() {
    let sys = models::random_stable(4, 12, 1, 2);
    let one = CVec::from_element(1, c(1.0));
    let l = CVec::from_vec(vec![c(1.0), c(-0.5)]);
    let data = TangentData::with_orders(vec![c(1.0)], vec![one], vec![3], vec![c(1.0)], vec![l], vec![3]).unwrap();
    let red = interpolatory_reduce(&sys, &data, BasisMode::Orthonormal).unwrap();
    let rep = verify_interpolation(&sys, &red, &data).unwrap();
    // Hermite conditions up to derivative N + M - 1 = 5
    assert_eq!(rep.of_kind(ConditionKind::Hermite).map(|c| c.derivative).max(), Some(5));
    assert!(rep.all_below(1e-8), "{rep:?}");
}

#[test]
fn separate_left_and_right_points() {
    let sys = models::random_stable(8, 10, 2, 2);
    let mut g = rng(3);
    let data = TangentData::new(
        vec![c(0.5), c(2.0)],
        vec![random_rvec(&mut g, 2), random_rvec(&mut g, 2)],
        vec![c(1.0), c(4.0)],
        vec![random_rvec(&mut g, 2), random_rvec(&mut g, 2)],
    )
    .unwrap();
    let red = interpolatory_reduce(&sys, &data, BasisMode::Raw).unwrap();
    let rep = verify_interpolation(&sys, &red, &data).unwrap();
    assert!(rep.all_below(1e-10), "{rep:?}");
    assert_eq!(rep.of_kind(ConditionKind::Hermite).count(), 0);
}

#[test]
fn prescribed_feedthrough_interpolates() {
    let sys = models::random_stable(6, 9, 2, 2);
    let data = conj_closed(2, 2, 6, 1, 1);
    let d_r = RMat::from_row_slice(2, 2, &[0.3, -0.1, 0.0, 0.7]);
    let red = reduce_with_feedthrough(&sys, &data, &d_r).unwrap();
    assert_eq!(red.d(), &d_r);
    let lagrange = TangentData::new(
        data.right_points.clone(),
        data.right_dirs.clone(),
        data.left_points.clone(),
        data.left_dirs.clone(),
    )
    .unwrap();
    for (s, r) in lagrange.right_points.iter().zip(&lagrange.right_dirs) {
        let a = sys.transfer(*s).unwrap() * r;
        let b = red.transfer(*s).unwrap() * r;
        assert!((&a - b).norm() < 1e-9 * a.norm());
    }
    for (s, l) in lagrange.left_points.iter().zip(&lagrange.left_dirs) {
        let a = l.transpose() * sys.transfer(*s).unwrap();
        let b = l.transpose() * red.transfer(*s).unwrap();
        assert!((&a - b).norm() < 1e-9 * a.norm());
    }
}

#[test]
fn rejects_bad_data() {
    let sys = models::three_state_example();
    let one = CVec::from_element(1, c(1.0));
    // wrong direction length
    let bad = TangentData::bitangential(vec![c(1.0)], vec![one.clone()], vec![one.clone()]).unwrap();
    assert!(matches!(
        interpolatory_reduce(&sys, &bad, BasisMode::Raw),
        Err(MorError::DimensionMismatch(_))
    ));
    // shift at a pole of the full model
    let two = CVec::from_vec(vec![c(1.0), c(0.0)]);
    let pole = TangentData::bitangential(vec![c(-1.0)], vec![two.clone()], vec![two.clone()]).unwrap();
    assert!(matches!(interpolatory_reduce(&sys, &pole, BasisMode::Raw), Err(MorError::SingularShift(_))));
    // complex point without its conjugate
    let lone = TangentData::bitangential(vec![cx(1.0, 1.0)], vec![two.clone()], vec![two]).unwrap();
    assert!(interpolatory_reduce(&sys, &lone, BasisMode::Raw).is_err());
    assert!(TangentData::bitangential(vec![c(1.0)], vec![CVec::zeros(2)], vec![one]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn interpolation_holds_for_random_shifts(
        seed in 0u64..10_000,
        s1 in 0.05f64..5.0,
        s2 in 0.05f64..5.0,
        w in 0.1f64..8.0,
    ) {
        prop_assume!((s1 - s2).abs() > 1e-2);
        let sys = models::random_stable(seed, 10, 2, 2);
        let mut g = rng(seed);
        let z = cx(s1, w);
        let r = random_cvec(&mut g, 2);
        let l = random_cvec(&mut g, 2);
        let (rr, lr) = (random_rvec(&mut g, 2), random_rvec(&mut g, 2));
        let data = TangentData::bitangential(
            vec![z, z.conj(), c(s2)],
            vec![r.clone(), r.map(|q| q.conj()), rr],
            vec![l.clone(), l.map(|q| q.conj()), lr],
        ).unwrap();
        let red = interpolatory_reduce(&sys, &data, BasisMode::Orthonormal).unwrap();
        let rep = verify_interpolation(&sys, &red, &data).unwrap();
        prop_assert!(rep.all_below(1e-8), "{}", rep.max_relative);
    }

    #[test]
    fn full_order_projection_reproduces(seed in 0u64..10_000, re in 0.0f64..3.0, im in -3.0f64..3.0) {
        let sys = models::random_descriptor(seed, 6, 1, 2);
        let id = RMat::identity(6, 6);
        let red = petrov_galerkin_reduce(&sys, &id, &id).unwrap();
        let s = cx(re, im);
        if let Ok(h) = sys.transfer(s) {
            let d: CMat = h.clone() - red.transfer(s).unwrap();
            prop_assert!(d.norm() <= 1e-12 * h.norm().max(1.0));
        }
    }

    #[test]
    fn reduced_model_independent_of_basis_scaling(seed in 0u64..10_000, k in 0.1f64..10.0) {
        let sys = models::random_stable(seed, 8, 1, 1);
        let data = conj_closed(1, 1, seed, 1, 1);
        let b = interpolation_bases(&sys, &data, BasisMode::Orthonormal).unwrap();
        let r1 = petrov_galerkin_reduce(&sys, &b.v, &b.w).unwrap();
        let r2 = petrov_galerkin_reduce(&sys, &(&b.v * k), &b.w).unwrap();
        let s = C64::new(0.7, 1.3);
        let h1 = r1.transfer(s).unwrap();
        prop_assert!((&h1 - r2.transfer(s).unwrap()).norm() <= 1e-11 * h1.norm());
    }
}
