//! H2-optimal reduction: IRKA, the pole-residue error formula, its gradient
//! and a projected descent refinement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{MorError, Result};
use crate::interp::{self, BasisMode, TangentData};
use crate::linalg::{self, Pairing};
use crate::lti::{DescriptorSystem, PoleResidueForm, TransferFunction};
use crate::{CVec, C64};
#[cfg(test)]
use crate::RMat;

/// How the first shift set is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum IrkaInit {
    /// Mirror images of the dominant poles, falling back to a log grid.
    Auto,
    /// Real shifts log-spaced over the pole magnitudes, seeded random directions.
    LogGrid,
    /// Explicit shifts and directions (must be closed under conjugation).
    Given(ShiftSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrkaConfig {
    pub order: usize,
    pub max_iters: usize,
    pub shift_tol: f64,
    pub init: IrkaInit,
    pub seed: u64,
    /// Magnitude range for log-grid shifts; defaults to the pole magnitudes
    /// (IRKA) or a sampled bandwidth estimate (TF-IRKA).
    pub shift_range: Option<(f64, f64)>,
}

impl IrkaConfig {
    pub fn new(order: usize) -> Self {
        IrkaConfig { order, max_iters: 200, shift_tol: 1e-10, init: IrkaInit::Auto, seed: 0, shift_range: None }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(MorError::InvalidInput("reduced order must be at least 1".into()));
        }
        if !(self.shift_tol > 0.0) {
            return Err(MorError::InvalidInput("shift tolerance must be positive".into()));
        }
        if let Some((lo, hi)) = self.shift_range {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(MorError::InvalidInput("shift range must satisfy 0 < lo <= hi".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(MorError::InvalidInput("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Interpolation points with tangent directions, used as `σ = μ` data.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    pub shifts: Vec<C64>,
    pub right: Vec<CVec>,
    pub left: Vec<CVec>,
}

impl ShiftSet {
    pub fn tangent_data(&self) -> Result<TangentData> {
        TangentData::bitangential(self.shifts.clone(), self.right.clone(), self.left.clone())
    }

    /// Mirror images `−λ_i` (unstable poles reflected first) with the
    /// residue directions of `pr`.
    pub fn from_poles(pr: &PoleResidueForm) -> ShiftSet {
        let shifts = pr
            .poles
            .iter()
            .map(|&l| if l.re > 0.0 { l.conj() } else { -l })
            .collect();
        ShiftSet { shifts, right: pr.right.clone(), left: pr.left.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IrkaIteration {
    pub iteration: usize,
    pub shifts: Vec<[f64; 2]>,
    pub relative_change: f64,
    pub reflected: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityEntry {
    pub pole: [f64; 2],
    pub right: f64,
    pub left: f64,
    pub hermite: f64,
}

/// Normalized residuals of the first-order H2 conditions at the mirror
/// images of the reduced poles.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalityReport {
    pub entries: Vec<OptimalityEntry>,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct IrkaResult {
    pub reduced: DescriptorSystem,
    pub pole_residue: PoleResidueForm,
    pub history: Vec<IrkaIteration>,
    pub converged: bool,
    pub optimality: OptimalityReport,
}

fn to_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// `max_i min_j |σ_i − τ_j| / |τ_j|`.
pub fn relative_shift_change(new: &[C64], old: &[C64]) -> f64 {
    new.iter()
        .map(|&s| {
            old.iter()
                .map(|&t| (s - t).norm() / t.norm().max(f64::MIN_POSITIVE))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub(crate) struct LoopOutcome<M> {
    pub model: M,
    pub pole_residue: PoleResidueForm,
    pub history: Vec<IrkaIteration>,
    pub converged: bool,
}

/// Fixed-point loop shared by IRKA and TF-IRKA: `step` builds the reduced
/// model interpolating at the given data and returns its pole-residue form.
pub(crate) fn irka_loop<M, F>(init: ShiftSet, cfg: &IrkaConfig, mut step: F) -> Result<LoopOutcome<M>>
where
    F: FnMut(&TangentData) -> Result<(M, PoleResidueForm)>,
{
    let mut current = init;
    let mut history = Vec::new();
    for it in 1..=cfg.max_iters {
        let data = current.tangent_data()?;
        let (model, pr) = step(&data)?;
        let reflected = pr.poles.iter().filter(|l| l.re > 0.0).count();
        let next = ShiftSet::from_poles(&pr);
        let change = relative_shift_change(&next.shifts, &current.shifts);
        history.push(IrkaIteration {
            iteration: it,
            shifts: current.shifts.iter().map(|&z| to_pair(z)).collect(),
            relative_change: change,
            reflected,
        });
        if change < cfg.shift_tol || it == cfg.max_iters {
            return Ok(LoopOutcome { model, pole_residue: pr, history, converged: change < cfg.shift_tol });
        }
        current = next;
    }
    unreachable!("max_iters >= 1 is validated")
}

/// Projection step: realify the conjugate-closed chains, orthonormalize
/// without truncation, and project.
pub fn project_at(sys: &DescriptorSystem, data: &TangentData) -> Result<DescriptorSystem> {
    let v = linalg::orthonormal_columns(&interp::realify_keep_dim(&interp::right_chains(sys, data)?)?)?;
    let w = linalg::orthonormal_columns(&interp::realify_keep_dim(&interp::left_chains(sys, data)?)?)?;
    interp::petrov_galerkin_reduce(sys, &v, &w)
}

/// Iterative rational Krylov algorithm.
pub fn irka(sys: &DescriptorSystem, cfg: &IrkaConfig) -> Result<IrkaResult> {
    cfg.validate()?;
    if sys.d().iter().any(|&x| x != 0.0) {
        return Err(MorError::NonzeroFeedthrough);
    }
    if sys.is_e_singular() {
        return Err(MorError::SingularE);
    }
    let st = sys.is_stable()?;
    if !st.stable {
        return Err(MorError::UnstableSystem { abscissa: st.abscissa });
    }
    if cfg.order > sys.order() {
        return Err(MorError::InvalidInput(format!(
            "reduced order {} exceeds full order {}",
            cfg.order,
            sys.order()
        )));
    }
    let init = initial_shifts(sys, cfg)?;
    let out = irka_loop(init, cfg, |data| {
        let red = project_at(sys, data)?;
        let pr = red.pole_residue()?;
        Ok((red, pr))
    })?;
    let optimality = optimality_residuals(sys, &out.pole_residue)?;
    Ok(IrkaResult {
        reduced: out.model,
        pole_residue: out.pole_residue,
        history: out.history,
        converged: out.converged,
        optimality,
    })
}

/// Initial shift set for `cfg`.
pub fn initial_shifts(sys: &DescriptorSystem, cfg: &IrkaConfig) -> Result<ShiftSet> {
    match &cfg.init {
        IrkaInit::Given(s) => {
            if s.shifts.len() != cfg.order {
                return Err(MorError::InvalidInput("initial shift count must equal the order".into()));
            }
            let data = s.tangent_data()?;
            data.check_dims(sys.inputs(), sys.outputs())?;
            if !data.is_conjugate_closed() {
                return Err(MorError::NotConjugateClosed);
            }
            Ok(s.clone())
        }
        IrkaInit::LogGrid => log_grid_shifts(sys, cfg.shift_range, cfg.order, cfg.seed),
        IrkaInit::Auto => match sys.pole_residue() {
            Ok(pr) => dominant_mirror_shifts(&pr, cfg, sys),
            Err(MorError::RepeatedPoles { .. }) | Err(MorError::SingularE) => {
                log_grid_shifts(sys, cfg.shift_range, cfg.order, cfg.seed)
            }
            Err(e) => Err(e),
        },
    }
}

fn dominant_mirror_shifts(pr: &PoleResidueForm, cfg: &IrkaConfig, sys: &DescriptorSystem) -> Result<ShiftSet> {
    let r = cfg.order;
    let pairing = linalg::conjugate_pairing(&pr.poles, 1e-12).ok_or(MorError::NotConjugateClosed)?;
    let weight = |i: usize| pr.left[i].norm() * pr.right[i].norm();
    let mut units: Vec<(f64, Vec<usize>)> = pairing
        .iter()
        .map(|p| match *p {
            Pairing::Real(i) => (weight(i), vec![i]),
            Pairing::Pair(i, j) => (weight(i), vec![i, j]),
        })
        .collect();
    units.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut chosen = Vec::new();
    for (_, idx) in &units {
        if chosen.len() + idx.len() <= r {
            chosen.extend(idx.iter().copied());
        }
        if chosen.len() == r {
            break;
        }
    }
    let mut set = ShiftSet {
        shifts: chosen.iter().map(|&i| -pr.poles[i]).collect(),
        right: chosen.iter().map(|&i| pr.right[i].clone()).collect(),
        left: chosen.iter().map(|&i| pr.left[i].clone()).collect(),
    };
    if set.shifts.len() < r {
        // only complex pairs remained: top up with real grid shifts
        let fill = log_grid_shifts(sys, cfg.shift_range, r - set.shifts.len(), cfg.seed)?;
        for (k, s) in fill.shifts.iter().enumerate() {
            let mut s = *s;
            while set.shifts.iter().any(|t| (t - s).norm() < 1e-8 * s.norm()) {
                s *= 1.1;
            }
            set.shifts.push(s);
            set.right.push(fill.right[k].clone());
            set.left.push(fill.left[k].clone());
        }
    }
    Ok(set)
}

fn log_grid_shifts(sys: &DescriptorSystem, cfg_range: Option<(f64, f64)>, r: usize, seed: u64) -> Result<ShiftSet> {
    let range = match cfg_range {
        Some(rg) => rg,
        None => {
            let spec = sys.pencil_spectrum()?;
            let mags: Vec<f64> = spec.finite.iter().map(|z| z.norm()).filter(|&x| x > 0.0).collect();
            if mags.is_empty() {
                (1.0, 1.0)
            } else {
                (
                    mags.iter().cloned().fold(f64::INFINITY, f64::min),
                    mags.iter().cloned().fold(0.0, f64::max),
                )
            }
        }
    };
    Ok(log_grid(range, sys.inputs(), sys.outputs(), r, seed))
}

/// `r` real shifts log-spaced over `range` with seeded random real directions.
pub fn log_grid(range: (f64, f64), m: usize, p: usize, r: usize, seed: u64) -> ShiftSet {
    let (lo, hi) = range;
    let (lo, hi) = if hi <= lo { (lo * 0.5, lo * 2.0) } else { (lo, hi) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<C64> = (0..r)
        .map(|i| {
            let t = if r == 1 { 0.5 } else { i as f64 / (r - 1) as f64 };
            C64::new(lo * (hi / lo).powf(t), 0.0)
        })
        .collect();
    let dir = |n: usize, rng: &mut ChaCha8Rng| {
        let v = crate::models::random_matrix(rng, n, 1);
        CVec::from_iterator(n, v.iter().map(|&x| C64::new(x, 0.0)))
    };
    let right = (0..r).map(|_| dir(m, &mut rng)).collect();
    let left = (0..r).map(|_| dir(p, &mut rng)).collect();
    ShiftSet { shifts, right, left }
}

/// Residuals of `H(−λ_k)r_k = H_r(−λ_k)r_k`, `ℓ_kᵀH(−λ_k) = ℓ_kᵀH_r(−λ_k)`
/// and `ℓ_kᵀH'(−λ_k)r_k = ℓ_kᵀH_r'(−λ_k)r_k`, each relative to the
/// full-model quantity.
pub fn optimality_residuals<F: TransferFunction + ?Sized>(full: &F, red: &PoleResidueForm) -> Result<OptimalityReport> {
    let mut entries = Vec::with_capacity(red.order());
    for k in 0..red.order() {
        let s = -red.poles[k];
        let (h, dh) = full.eval_with_derivative(s)?;
        let (hr, dhr) = red.eval_with_derivative(s)?;
        let (l, r) = (&red.left[k], &red.right[k]);
        let rel = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
        let hf_r = &h * r;
        let right = rel((&hf_r - &hr * r).norm(), hf_r.norm());
        let hf_l = l.transpose() * &h;
        let left = rel((&hf_l - l.transpose() * &hr).norm(), hf_l.norm());
        let hd = (l.transpose() * &dh * r)[(0, 0)];
        let hdr = (l.transpose() * &dhr * r)[(0, 0)];
        let hermite = rel((hd - hdr).norm(), hd.norm());
        entries.push(OptimalityEntry { pole: to_pair(red.poles[k]), right, left, hermite });
    }
    let max_residual = entries
        .iter()
        .map(|e| e.right.max(e.left).max(e.hermite))
        .fold(0.0, f64::max);
    Ok(OptimalityReport { entries, max_residual })
}

fn check_reduced(red: &PoleResidueForm) -> Result<()> {
    if red.feedthrough.iter().any(|&x| x != 0.0) {
        return Err(MorError::NonzeroFeedthrough);
    }
    if !red.is_stable() {
        return Err(MorError::UnstableSystem { abscissa: red.spectral_abscissa() });
    }
    red.check_distinct()
}

/// `‖H − H_r‖²` from `‖H‖²` and evaluations of `H` at the mirror images of the
/// reduced poles.
pub fn h2_error_squared<F: TransferFunction + ?Sized>(full: &F, full_norm_sq: f64, red: &PoleResidueForm) -> Result<f64> {
    check_reduced(red)?;
    let mut cross = C64::new(0.0, 0.0);
    for k in 0..red.order() {
        let h = full.eval(-red.poles[k])?;
        cross += (red.left[k].transpose() * h * &red.right[k])[(0, 0)];
    }
    Ok(full_norm_sq - 2.0 * cross.re + reduced_norm_sq(red))
}

/// `‖H_r‖² = Σ_{k,j} (ℓ_kᵀℓ_j)(r_jᵀr_k)/(−λ_k − λ_j)`.
pub fn reduced_norm_sq(red: &PoleResidueForm) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..red.order() {
        for j in 0..red.order() {
            let ll = red.left[k].dot(&red.left[j]);
            let rr = red.right[j].dot(&red.right[k]);
            acc += ll * rr / (-red.poles[k] - red.poles[j]);
        }
    }
    acc.re
}

/// H2 norm of `H − H_r` for a stable, strictly proper full model.
pub fn h2_error_norm(full: &DescriptorSystem, red: &PoleResidueForm) -> Result<f64> {
    let n = full.h2_norm()?;
    Ok(h2_error_squared(full, n * n, red)?.max(0.0).sqrt())
}

/// Gradient of `J = ‖H − H_r‖²` with `J` viewed as a holomorphic function of
/// each pole and residue direction separately.
#[derive(Clone, Debug)]
pub struct H2Gradient {
    pub d_pole: Vec<C64>,
    pub d_left: Vec<CVec>,
    pub d_right: Vec<CVec>,
}

impl H2Gradient {
    /// Euclidean norm of the gradient with respect to the real parameters.
    pub fn real_norm(&self, pairing: &[Pairing]) -> f64 {
        let v = self.real_vector(pairing);
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Gradient in the real coordinates of [`real_params`].
    pub fn real_vector(&self, pairing: &[Pairing]) -> Vec<f64> {
        let mut out = Vec::new();
        for p in pairing {
            match *p {
                Pairing::Real(i) => {
                    out.push(self.d_pole[i].re);
                    out.extend(self.d_left[i].iter().map(|z| z.re));
                    out.extend(self.d_right[i].iter().map(|z| z.re));
                }
                Pairing::Pair(i, _) => {
                    let g = self.d_pole[i];
                    out.push(2.0 * g.re);
                    out.push(-2.0 * g.im);
                    for d in [&self.d_left[i], &self.d_right[i]] {
                        out.extend(d.iter().map(|z| 2.0 * z.re));
                        out.extend(d.iter().map(|z| -2.0 * z.im));
                    }
                }
            }
        }
        out
    }
}

/// `∂J/∂λ_i = −2ℓ_iᵀ(H_r'(−λ_i) − H'(−λ_i))r_i`,
/// `∂J/∂ℓ_i = 2(H_r(−λ_i) − H(−λ_i))r_i`, `∂J/∂r_i = 2(H_r(−λ_i) − H(−λ_i))ᵀℓ_i`.
pub fn h2_gradient<F: TransferFunction + ?Sized>(full: &F, red: &PoleResidueForm) -> Result<H2Gradient> {
    check_reduced(red)?;
    let mut d_pole = Vec::with_capacity(red.order());
    let mut d_left = Vec::with_capacity(red.order());
    let mut d_right = Vec::with_capacity(red.order());
    let two = C64::new(2.0, 0.0);
    for i in 0..red.order() {
        let s = -red.poles[i];
        let (h, dh) = full.eval_with_derivative(s)?;
        let (hr, dhr) = red.eval_with_derivative(s)?;
        let (l, r) = (&red.left[i], &red.right[i]);
        d_pole.push(-two * (l.transpose() * (&dhr - &dh) * r)[(0, 0)]);
        let diff = &hr - &h;
        d_left.push(&diff * r * two);
        d_right.push(diff.transpose() * l * two);
    }
    Ok(H2Gradient { d_pole, d_left, d_right })
}

/// Real coordinates of a conjugate-closed pole-residue form: per real mode
/// `(λ, ℓ, r)`, per pair `(Re λ, Im λ, Re ℓ, Im ℓ, Re r, Im r)`.
pub fn real_params(pr: &PoleResidueForm, pairing: &[Pairing]) -> Vec<f64> {
    let mut out = Vec::new();
    for p in pairing {
        match *p {
            Pairing::Real(i) => {
                out.push(pr.poles[i].re);
                out.extend(pr.left[i].iter().map(|z| z.re));
                out.extend(pr.right[i].iter().map(|z| z.re));
            }
            Pairing::Pair(i, _) => {
                out.push(pr.poles[i].re);
                out.push(pr.poles[i].im);
                for d in [&pr.left[i], &pr.right[i]] {
                    out.extend(d.iter().map(|z| z.re));
                    out.extend(d.iter().map(|z| z.im));
                }
            }
        }
    }
    out
}

/// Inverse of [`real_params`].
pub fn from_real_params(template: &PoleResidueForm, pairing: &[Pairing], x: &[f64]) -> PoleResidueForm {
    let (p, m) = template.feedthrough.shape();
    let mut out = template.clone();
    let mut k = 0;
    let take = |n: usize, k: &mut usize| {
        let v = x[*k..*k + n].to_vec();
        *k += n;
        v
    };
    for pr in pairing {
        match *pr {
            Pairing::Real(i) => {
                out.poles[i] = C64::new(take(1, &mut k)[0], 0.0);
                out.left[i] = CVec::from_iterator(p, take(p, &mut k).into_iter().map(|a| C64::new(a, 0.0)));
                out.right[i] = CVec::from_iterator(m, take(m, &mut k).into_iter().map(|a| C64::new(a, 0.0)));
            }
            Pairing::Pair(i, j) => {
                let lam = take(2, &mut k);
                out.poles[i] = C64::new(lam[0], lam[1]);
                out.poles[j] = out.poles[i].conj();
                let (lr, li) = (take(p, &mut k), take(p, &mut k));
                let (rr, ri) = (take(m, &mut k), take(m, &mut k));
                out.left[i] = CVec::from_iterator(p, lr.iter().zip(&li).map(|(a, b)| C64::new(*a, *b)));
                out.right[i] = CVec::from_iterator(m, rr.iter().zip(&ri).map(|(a, b)| C64::new(*a, *b)));
                out.left[j] = out.left[i].map(|z| z.conj());
                out.right[j] = out.right[i].map(|z| z.conj());
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop once the real gradient norm falls below `grad_tol · ‖H‖²`.
    pub grad_tol: f64,
    pub max_backtracks: usize,
    /// Poles are kept in `Re λ ≤ −margin · (1 + max |λ_init|)`.
    pub margin: f64,
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { max_iters: 500, grad_tol: 1e-6, max_backtracks: 60, margin: 1e-8, armijo: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentStop {
    GradientTolerance,
    MaxIterations,
    /// No decrease is measurable above the rounding level of `J`.
    NoiseFloor,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub form: PoleResidueForm,
    /// `J` at the start and after every accepted step.
    pub objective: Vec<f64>,
    pub gradient_norm: f64,
    pub stop: DescentStop,
}

/// Projected gradient descent on `J = ‖H − H_r‖²` with Barzilai-Borwein
/// trial steps and Armijo backtracking.
pub fn descent_minimize(full: &DescriptorSystem, init: &PoleResidueForm, opts: &DescentOptions) -> Result<DescentResult> {
    let hn = full.h2_norm()?;
    let hsq = hn * hn;
    check_reduced(init)?;
    let pairing = linalg::conjugate_pairing(&init.poles, 1e-12).ok_or(MorError::NotConjugateClosed)?;
    let floor_re = -opts.margin * (1.0 + init.poles.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let pole_slots: Vec<usize> = {
        let (p, m) = init.feedthrough.shape();
        let mut slots = Vec::new();
        let mut k = 0;
        for pr in &pairing {
            slots.push(k);
            k += match pr {
                Pairing::Real(_) => 1 + p + m,
                Pairing::Pair(..) => 2 + 2 * (p + m),
            };
        }
        slots
    };
    let project = |x: &mut Vec<f64>| {
        for &s in &pole_slots {
            if x[s] > floor_re {
                x[s] = floor_re;
            }
        }
    };
    let objective = |x: &[f64]| -> Result<(PoleResidueForm, f64)> {
        let form = from_real_params(init, &pairing, x);
        let j = h2_error_squared(full, hsq, &form)?;
        Ok((form, j))
    };

    let mut x = real_params(init, &pairing);
    project(&mut x);
    let (mut form, mut j) = objective(&x)?;
    let mut g = h2_gradient(full, &form)?.real_vector(&pairing);
    let mut gnorm = norm(&g);
    let mut history = vec![j];
    let mut step = 1.0 / gnorm.max(f64::MIN_POSITIVE) * x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0) * 1e-2;
    let noise = 1e-13 * hsq.max(f64::MIN_POSITIVE);

    for _ in 0..opts.max_iters {
        if gnorm <= opts.grad_tol * hsq {
            return Ok(DescentResult { form, objective: history, gradient_norm: gnorm, stop: DescentStop::GradientTolerance });
        }
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..opts.max_backtracks {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
            project(&mut xn);
            let decrease: f64 = g.iter().zip(x.iter().zip(&xn)).map(|(gi, (a, b))| gi * (a - b)).sum();
            match objective(&xn) {
                Ok((fn_, jn)) if jn <= j - opts.armijo * decrease && jn <= j => {
                    accepted = Some((xn, fn_, jn));
                    break;
                }
                Ok(_) | Err(MorError::RepeatedPoles { .. }) | Err(MorError::UnstableSystem { .. }) => {
                    alpha *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let Some((xn, fn_, jn)) = accepted else {
            if j <= noise.max(1e-10 * hsq) || gnorm <= 1e-4 * hsq {
                return Ok(DescentResult { form, objective: history, gradient_norm: gnorm, stop: DescentStop::NoiseFloor });
            }
            return Err(MorError::LineSearchFailure(opts.max_backtracks));
        };
        let gn = h2_gradient(full, &fn_)?.real_vector(&pairing);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { ss / sy } else { alpha * 2.0 };
        let stalled = (j - jn) <= noise;
        x = xn;
        form = fn_;
        j = jn;
        g = gn;
        gnorm = norm(&g);
        history.push(j);
        if stalled && gnorm > opts.grad_tol * hsq && j <= 1e-10 * hsq {
            return Ok(DescentResult { form, objective: history, gradient_norm: gnorm, stop: DescentStop::NoiseFloor });
        }
    }
    Ok(DescentResult { form, objective: history, gradient_norm: gnorm, stop: DescentStop::MaxIterations })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Real gradient norm of `J` relative to `‖H‖²`.
pub fn gradient_norm_relative(full: &DescriptorSystem, red: &PoleResidueForm) -> Result<f64> {
    let hn = full.h2_norm()?;
    let pairing = linalg::conjugate_pairing(&red.poles, 1e-12).ok_or(MorError::NotConjugateClosed)?;
    Ok(h2_gradient(full, red)?.real_norm(&pairing) / (hn * hn))
}

/// Interpolatory reduction at a given shift set (bitangential Hermite).
pub fn reduce_at_shifts(sys: &DescriptorSystem, shifts: &ShiftSet) -> Result<DescriptorSystem> {
    interp::interpolatory_reduce(sys, &shifts.tangent_data()?, BasisMode::Orthonormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn lag(a: f64) -> PoleResidueForm {
        PoleResidueForm::new(
            vec![c(-a)],
            vec![CVec::from_element(1, c(1.0))],
            vec![CVec::from_element(1, c(1.0))],
            RMat::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn analytic_error_between_lags() {
        let full = lag(1.0).to_descriptor().unwrap();
        let err = h2_error_norm(&full, &lag(2.0)).unwrap();
        assert!((err - (1.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!(h2_error_norm(&full, &lag(1.0)).unwrap() < 1e-7);
    }

    #[test]
    fn full_order_irka_recovers_system() {
        let sys = models::random_stable(11, 4, 1, 1);
        let res = irka(&sys, &IrkaConfig::new(4)).unwrap();
        assert!(res.converged);
        assert!(res.history.len() <= 2, "{}", res.history.len());
        for s in [c(0.3), C64::new(0.0, 2.0)] {
            let d = (sys.transfer(s).unwrap() - res.reduced.transfer(s).unwrap()).norm();
            assert!(d < 1e-9 * sys.transfer(s).unwrap().norm());
        }
    }

    #[test]
    fn irka_reaches_optimality() {
        let sys = models::random_stable(0, 12, 2, 2);
        let res = irka(&sys, &IrkaConfig::new(4)).unwrap();
        assert!(res.converged);
        assert!(res.optimality.max_residual < 1e-7, "{:?}", res.optimality);
        assert!(gradient_norm_relative(&sys, &res.pole_residue).unwrap() < 1e-6);
    }

    #[test]
    fn real_param_roundtrip() {
        let sys = models::random_stable(2, 6, 2, 1);
        let pr = sys.pole_residue().unwrap();
        let pairing = linalg::conjugate_pairing(&pr.poles, 1e-12).unwrap();
        let back = from_real_params(&pr, &pairing, &real_params(&pr, &pairing));
        assert_eq!(back, pr);
    }

    #[test]
    fn descent_monotone() {
        let sys = models::random_stable(8, 8, 1, 1);
        let init = lag(1.0);
        let res = descent_minimize(&sys, &init, &DescentOptions { max_iters: 50, ..Default::default() }).unwrap();
        for w in res.objective.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn config_validation() {
        let sys = models::random_stable(1, 4, 1, 1);
        assert!(matches!(irka(&sys, &IrkaConfig::new(0)), Err(MorError::InvalidInput(_))));
        let mut cfg = IrkaConfig::new(2);
        cfg.shift_tol = 0.0;
        assert!(matches!(irka(&sys, &cfg), Err(MorError::InvalidInput(_))));
    }
}
