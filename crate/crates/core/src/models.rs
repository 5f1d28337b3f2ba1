//! Small benchmark systems and seeded random generators.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coprime::{unit_column, CoprimeSystem, ScalarSFunction::Power, Term};
use crate::lti::DescriptorSystem;
use crate::parametric::{CoefficientFunction, Monomial, ParamGroup, ParametricCoprimeSystem};
use crate::RMat;

/// Three-state, two-input, two-output system with `E = I`.
pub fn three_state_example() -> DescriptorSystem {
    DescriptorSystem::strictly_proper(
        RMat::identity(3, 3),
        RMat::from_row_slice(3, 3, &[-6.0, -11.0, -6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        RMat::from_row_slice(3, 2, &[-1.0, 1.0, 0.0, 1.0, 1.0, 0.0]),
        RMat::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 1.0, -1.0, 0.0]),
    )
    .expect("consistent example data")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
    RMat::from_fn(r, c, |_, _| normal(rng))
}

/// Random stable `E = I` system whose poles lie in `[-10, -0.1] × [-10i, 10i]`,
/// hidden behind a well-conditioned similarity transform.
pub fn random_stable(seed: u64, n: usize, m: usize, p: usize) -> DescriptorSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a0 = RMat::zeros(n, n);
    let mut k = 0;
    while k < n {
        let re = -(10f64.powf(rng.random_range(-1.0..1.0)));
        if k + 1 < n && rng.random::<f64>() < 0.6 {
            let im = 10f64.powf(rng.random_range(-1.0..1.0));
            a0[(k, k)] = re;
            a0[(k + 1, k + 1)] = re;
            a0[(k, k + 1)] = im;
            a0[(k + 1, k)] = -im;
            k += 2;
        } else {
            a0[(k, k)] = re;
            k += 1;
        }
    }
    let t = RMat::identity(n, n) + random_matrix(&mut rng, n, n) * (0.3 / (n as f64).sqrt());
    let tinv = t.clone().try_inverse().expect("near-identity transform");
    let a = &t * a0 * tinv;
    let b = random_matrix(&mut rng, n, m);
    let c = random_matrix(&mut rng, p, n);
    DescriptorSystem::from_state_space(a, b, c, RMat::zeros(p, m)).expect("consistent sizes")
}

/// Random stable system with a random SPD `E`.
pub fn random_descriptor(seed: u64, n: usize, m: usize, p: usize) -> DescriptorSystem {
    let base = random_stable(seed, n, m, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let g = random_matrix(&mut rng, n, n) * (0.3 / (n as f64).sqrt());
    let e = RMat::identity(n, n) + &g * g.transpose();
    let a = &e * base.a();
    let b = &e * base.b();
    DescriptorSystem::new(e, a, b, base.c().clone(), base.d().clone()).expect("consistent sizes")
}

/// Symmetric system `E = Eᵀ ≻ 0`, `A = Aᵀ ≺ 0`, `B = Cᵀ`.
pub fn random_symmetric(seed: u64, n: usize, m: usize) -> DescriptorSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_matrix(&mut rng, n, n) * (0.5 / (n as f64).sqrt());
    let e = RMat::identity(n, n) + &g * g.transpose();
    let h = random_matrix(&mut rng, n, n);
    let diag: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..1.5))).collect();
    let q = h.qr().q();
    let a = -(&q * RMat::from_diagonal(&DVector::from_vec(diag)) * q.transpose());
    let a = (&a + a.transpose()) * 0.5;
    let b = random_matrix(&mut rng, n, m);
    let c = b.transpose();
    DescriptorSystem::new(e, a, b, c, RMat::zeros(m, m)).expect("consistent sizes")
}

/// Tridiagonal `T` with ones on the off-diagonals and at `(1,1)`, `(n,n)`.
fn delay_t(n: usize) -> RMat {
    let mut t = RMat::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        t[(i, i + 1)] = 1.0;
        t[(i + 1, i)] = 1.0;
    }
    t[(0, 0)] += 1.0;
    t[(n - 1, n - 1)] += 1.0;
    t
}

/// `(E, A0, A1) = (κI + T, (3/τ)(T − κI), (1/τ)(T − κI))`.
pub fn delay_family_matrices(n: usize, kappa: f64, tau: f64) -> (RMat, RMat, RMat) {
    let t = delay_t(n);
    let id = RMat::identity(n, n);
    let e = &id * kappa + &t;
    let shifted = &t - &id * kappa;
    (e, &shifted * (3.0 / tau), &shifted * (1.0 / tau))
}

/// Single-input single-output delay system `e_1ᵀ(sE − A0 − e^{−τs}A1)^{-1}e_1`.
pub fn delay_family(n: usize, kappa: f64, tau: f64) -> CoprimeSystem {
    let (e, a0, a1) = delay_family_matrices(n, kappa, tau);
    let b = unit_column(n);
    let c = b.transpose();
    CoprimeSystem::delay(e, a0, a1, tau, b, c).expect("consistent sizes")
}

/// Two-mass oscillator `K(s,p) = s²M + K + p_1 sK_1 + p_2 sK_2`, `b = e_1`, `c = e_2ᵀ`.
pub fn mass_spring() -> ParametricCoprimeSystem {
    let m = RMat::identity(2, 2);
    let k = RMat::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 2.0]);
    let k1 = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let k2 = RMat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let b = RMat::from_column_slice(2, 1, &[1.0, 0.0]);
    let c = RMat::from_row_slice(1, 2, &[0.0, 1.0]);
    ParametricCoprimeSystem::new(
        vec![
            ParamGroup::constant(vec![Term::new(Power(2), m), Term::new(Power(0), k)]),
            ParamGroup::new(CoefficientFunction::Coordinate { index: 0 }, vec![Term::new(Power(1), k1)]),
            ParamGroup::new(CoefficientFunction::Coordinate { index: 1 }, vec![Term::new(Power(1), k2)]),
        ],
        vec![ParamGroup::constant(vec![Term::new(Power(0), b)])],
        vec![ParamGroup::constant(vec![Term::new(Power(0), c)])],
        RMat::zeros(1, 1),
        2,
    )
    .expect("consistent example data")
}

/// Random affine-parametric first-order system with `nu` parameters. `K`
/// depends on every coordinate (one group through an exponential), `B` and
/// `C` carry one parametric group each.
pub fn random_parametric(seed: u64, n: usize, nu: usize, m: usize, p: usize) -> ParametricCoprimeSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_matrix(&mut rng, n, n) * (0.3 / (n as f64).sqrt());
    let e = RMat::identity(n, n) + &g * g.transpose();
    let a = random_stable(seed.wrapping_add(1), n, m, p).a().clone();
    let mut k = vec![ParamGroup::constant(vec![Term::new(Power(1), e), Term::new(Power(0), -a)])];
    for j in 0..nu {
        let kj = random_matrix(&mut rng, n, n) * (0.3 / (n as f64).sqrt());
        let coefficient = if j == 1 {
            let mut weights = vec![0.0; nu];
            weights[j] = 0.5;
            CoefficientFunction::ExpAffine { scale: 1.0, offset: 0.0, weights }
        } else {
            CoefficientFunction::Coordinate { index: j }
        };
        let f = if j % 2 == 0 { Power(1) } else { Power(0) };
        k.push(ParamGroup::new(coefficient, vec![Term::new(f, kj)]));
    }
    let mut b = vec![ParamGroup::constant(vec![Term::new(Power(0), random_matrix(&mut rng, n, m))])];
    let mut c = vec![ParamGroup::constant(vec![Term::new(Power(0), random_matrix(&mut rng, p, n))])];
    if nu > 0 {
        b.push(ParamGroup::new(
            CoefficientFunction::Coordinate { index: 0 },
            vec![Term::new(Power(0), random_matrix(&mut rng, n, m) * 0.3)],
        ));
        let mut powers = vec![0; nu];
        powers[nu - 1] = 2;
        c.push(ParamGroup::new(
            CoefficientFunction::Polynomial { terms: vec![Monomial { coeff: 0.5, powers }] },
            vec![Term::new(Power(0), random_matrix(&mut rng, p, n) * 0.3)],
        ));
    }
    ParametricCoprimeSystem::new(k, b, c, RMat::zeros(p, m), nu).expect("consistent sizes")
}

/// Random regular index-1 pencil with `rank E = r`, hidden behind random
/// row and column transforms; `P(s)` is a nonzero constant.
pub fn random_index1(seed: u64, n: usize, r: usize, m: usize, p: usize) -> DescriptorSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = 1.0 / (n as f64).sqrt();
    let mut e0 = RMat::zeros(n, n);
    e0.view_mut((0, 0), (r, r)).copy_from(&RMat::identity(r, r));
    let mut a0 = random_matrix(&mut rng, n, n) * (0.5 * sc);
    for i in 0..r {
        a0[(i, i)] -= 3.0;
    }
    for i in r..n {
        a0[(i, i)] -= 2.0;
    }
    let pl = RMat::identity(n, n) + random_matrix(&mut rng, n, n) * (0.3 * sc);
    let pr = RMat::identity(n, n) + random_matrix(&mut rng, n, n) * (0.3 * sc);
    let b = random_matrix(&mut rng, n, m);
    let c = random_matrix(&mut rng, p, n);
    DescriptorSystem::strictly_proper(&pl * e0 * &pr, &pl * a0 * &pr, b, c).expect("consistent sizes")
}
