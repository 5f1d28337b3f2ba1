#![allow(dead_code)]

use interpmor::h2::{from_real_params, h2_error_squared, h2_gradient, real_params, reduce_at_shifts, ShiftSet};
use interpmor::interp::TangentData;
use interpmor::linalg::conjugate_pairing;
use interpmor::loewner::hermite_data;
use interpmor::weighted::WeightSystem;
use interpmor::{CMat, CVec, DescriptorSystem, PoleResidueForm, RMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cplx(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `C (sE − A)^{-1} B + D` through an explicit inverse.
pub fn transfer_explicit(sys: &DescriptorSystem, s: C64) -> CMat {
    let pencil = cplx(sys.e()) * s - cplx(sys.a());
    let inv = pencil.try_inverse().expect("pencil invertible at probe");
    cplx(sys.c()) * inv * cplx(sys.b()) + cplx(sys.d())
}

/// Central difference of `f` at `s` along the real axis.
pub fn fd_derivative<F: Fn(C64) -> CMat>(f: F, s: C64) -> CMat {
    let h = 1e-5 * s.norm().max(1.0);
    (f(s + c(h)) - f(s - c(h))) / c(2.0 * h)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let s = f(mid - x) + f(mid + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod 7-15 quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let rough: f64 = (0..8).map(|k| gk15(&f, a + (b - a) * k as f64 / 8.0, a + (b - a) * (k + 1) as f64 / 8.0).0).sum();
    adapt(&f, a, b, rel_tol * rough.abs().max(f64::MIN_POSITIVE), 40)
}

/// `‖H‖_H2` of a real strictly proper transfer function by quadrature of
/// `(1/π)∫_0^∞ ‖H(iω)‖_F² dω` with `ω = tan θ`.
pub fn h2_quadrature<F: Fn(C64) -> CMat>(h: F) -> f64 {
    let g = |t: f64| {
        let w = t.tan();
        let sec2 = 1.0 + w * w;
        h(cx(0.0, w)).norm_squared() * sec2
    };
    (integrate(g, 0.0, std::f64::consts::FRAC_PI_2, 1e-11) / std::f64::consts::PI).sqrt()
}

/// Largest singular value of `H(iω)` over a log grid, refined by golden
/// section around the best sample.
pub fn hinf_grid<F: Fn(C64) -> CMat>(h: F, lo: f64, hi: f64, n: usize) -> f64 {
    let sig = |w: f64| h(cx(0.0, w)).singular_values().max();
    let grid: Vec<f64> = (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect();
    let (mut best_k, mut best) = (0, sig(0.0));
    for (k, &w) in grid.iter().enumerate() {
        let v = sig(w);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    if best_k == 0 {
        return best;
    }
    let (mut a, mut b) = (grid[best_k - 1], grid[(best_k + 1).min(n - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if sig(x1) > sig(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.max(sig(0.5 * (a + b)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
}

pub fn random_rvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| c(rng.random_range(-1.0..1.0))))
}

/// Max over probes of `‖F(s) − G(s)‖ / ‖F(s)‖`.
pub fn max_rel_dev<F, G>(f: F, g: G, probes: &[C64]) -> f64
where
    F: Fn(C64) -> CMat,
    G: Fn(C64) -> CMat,
{
    probes
        .iter()
        .map(|&s| {
            let a = f(s);
            (&a - g(s)).norm() / a.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

pub fn probes(n: usize) -> Vec<C64> {
    (0..n).map(|k| cx(0.05 + 0.13 * k as f64, 0.9 * k as f64 - 3.0)).collect()
}

/// A stable reduced model from random conjugate-closed shifts; odd seeds use
/// real shifts only.
pub fn random_reduced(sys: &DescriptorSystem, seed: u64, r: usize) -> Option<PoleResidueForm> {
    let mut g = rng(seed);
    let (m, p) = (sys.inputs(), sys.outputs());
    let (mut shifts, mut right, mut left) = (Vec::new(), Vec::new(), Vec::new());
    while shifts.len() + 2 <= r && seed % 2 == 0 {
        let s = cx(0.2 + 2.0 * g.random::<f64>(), 3.0 * g.random::<f64>());
        let (rv, lv) = (random_cvec(&mut g, m), random_cvec(&mut g, p));
        shifts.push(s);
        right.push(rv.clone());
        left.push(lv.clone());
        shifts.push(s.conj());
        right.push(rv.map(|z| z.conj()));
        left.push(lv.map(|z| z.conj()));
    }
    while shifts.len() < r {
        shifts.push(c(0.1 + 5.0 * g.random::<f64>()));
        right.push(random_rvec(&mut g, m));
        left.push(random_rvec(&mut g, p));
    }
    let red = reduce_at_shifts(sys, &ShiftSet { shifts, right, left }).ok()?;
    let pr = red.pole_residue().ok()?;
    if pr.is_stable() {
        Some(pr)
    } else {
        None
    }
}

/// `J` as a function of the real parameters of `pr`.
fn objective(sys: &DescriptorSystem, nsq: f64, pr: &PoleResidueForm, x: &[f64]) -> f64 {
    let pairing = conjugate_pairing(&pr.poles, 1e-12).unwrap();
    h2_error_squared(sys, nsq, &from_real_params(pr, &pairing, x)).unwrap()
}

/// Largest `|fd_i − g_i| / ‖g‖` over the real parameters of `pr`.
pub fn max_fd_deviation(sys: &DescriptorSystem, pr: &PoleResidueForm) -> f64 {
    let n = sys.h2_norm().unwrap();
    let nsq = n * n;
    let pairing = conjugate_pairing(&pr.poles, 1e-12).unwrap();
    let x = real_params(pr, &pairing);
    let g = h2_gradient(sys, pr).unwrap().real_vector(&pairing);
    assert_eq!(g.len(), x.len());
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1e-2);
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[i] += h;
        xm[i] -= h;
        let fd = (objective(sys, nsq, pr, &xp) - objective(sys, nsq, pr, &xm)) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / gnorm);
    }
    worst
}

pub fn random_hermite_data(seed: u64, m: usize, p: usize, pairs: usize, reals: usize) -> TangentData {
    let mut g = rng(seed);
    let (mut pts, mut rd, mut ld) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..pairs {
        let s = cx(0.2 + 0.5 * k as f64, 0.5 + 1.1 * k as f64);
        let (r, l) = (random_cvec(&mut g, m), random_cvec(&mut g, p));
        pts.extend([s, s.conj()]);
        rd.extend([r.clone(), r.map(|z| z.conj())]);
        ld.extend([l.clone(), l.map(|z| z.conj())]);
    }
    for k in 0..reals {
        pts.push(c(0.3 + 0.9 * k as f64));
        rd.push(random_rvec(&mut g, m));
        ld.push(random_rvec(&mut g, p));
    }
    hermite_data(pts, rd, ld).unwrap()
}

/// Weight with diagonal `A_w`, so poles and residues are read off directly.
pub fn diag_weight(poles: &[f64], b: RMat, cm: RMat, d: RMat) -> WeightSystem {
    WeightSystem::new(RMat::from_diagonal(&nalgebra::DVector::from_column_slice(poles)), b, cm, d).unwrap()
}

pub fn weight_eval(poles: &[f64], b: &RMat, cm: &RMat, d: &RMat, s: C64) -> CMat {
    let mut out = cplx(d);
    for (k, &a) in poles.iter().enumerate() {
        out += cplx(&(cm.column(k) * b.row(k))) / (s - c(a));
    }
    out
}

/// `H(s)W(s)W(−s)ᵀ + Σ_k H(−λ_k)W(−λ_k)R_kᵀ/(s + λ_k)` for `W` with poles `λ_k`
/// and residues `R_k`.
pub fn fmap_oracle(sys: &DescriptorSystem, poles: &[f64], b: &RMat, cm: &RMat, d: &RMat, s: C64) -> CMat {
    let w = |z: C64| weight_eval(poles, b, cm, d, z);
    let mut out = transfer_explicit(sys, s) * w(s) * w(-s).transpose();
    for (k, &a) in poles.iter().enumerate() {
        let res = cplx(&(cm.column(k) * b.row(k)));
        out += transfer_explicit(sys, c(-a)) * w(c(-a)) * res.transpose() / (s + c(a));
    }
    out
}

pub fn sample_weight() -> (Vec<f64>, RMat, RMat, RMat) {
    let poles = vec![-1.0, -3.5];
    let b = RMat::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 1.0]);
    let cm = RMat::from_row_slice(2, 2, &[0.8, 0.1, 0.0, 1.2]);
    let d = RMat::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]);
    (poles, b, cm, d)
}
