//! First-order descriptor systems `E x' = A x + B u, y = C x + D u`.
//!
//! Transfer-function evaluation, pole-residue expansion, H2 / H∞ norms and
//! stability of the pencil `λE − A`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{MorError, Result};
use crate::linalg::{self, eig, to_complex, Lu};
use crate::{CMat, CVec, RMat, C64};

/// Anything that can be sampled as a `p × m` transfer function.
pub trait TransferFunction {
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    fn eval(&self, s: C64) -> Result<CMat>;
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)>;

    /// `k`-th derivative in `s`. Implementors that only know the first
    /// derivative keep this default.
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        match k {
            0 => self.eval(s),
            1 => Ok(self.eval_with_derivative(s)?.1),
            _ => Err(MorError::InvalidInput(format!(
                "derivative of order {k} not available for this representation"
            ))),
        }
    }
}

impl<T: TransferFunction + ?Sized> TransferFunction for &T {
    fn inputs(&self) -> usize {
        (**self).inputs()
    }
    fn outputs(&self) -> usize {
        (**self).outputs()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        (**self).eval(s)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        (**self).eval_with_derivative(s)
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        (**self).eval_derivative(s, k)
    }
}

/// Real descriptor realization `(E, A, B, C, D)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSystem {
    e: RMat,
    a: RMat,
    b: RMat,
    c: RMat,
    d: RMat,
}

fn check_finite(m: &RMat, name: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MorError::NonFinite(name))
    }
}

impl DescriptorSystem {
    pub fn new(e: RMat, a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        let n = a.nrows();
        let dims = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(MorError::DimensionMismatch(what.to_string()))
            }
        };
        dims(a.ncols() == n, "A must be square")?;
        dims(e.nrows() == n && e.ncols() == n, "E must match A")?;
        dims(b.nrows() == n, "B must have n rows")?;
        dims(c.ncols() == n, "C must have n columns")?;
        dims(d.nrows() == c.nrows() && d.ncols() == b.ncols(), "D must be p x m")?;
        for (m, name) in [(&e, "E"), (&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            check_finite(m, name)?;
        }
        Ok(DescriptorSystem { e, a, b, c, d })
    }

    /// `E = I`.
    pub fn from_state_space(a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        let n = a.nrows();
        Self::new(RMat::identity(n, n), a, b, c, d)
    }

    /// Strictly proper system with `D = 0`.
    pub fn strictly_proper(e: RMat, a: RMat, b: RMat, c: RMat) -> Result<Self> {
        let d = RMat::zeros(c.nrows(), b.ncols());
        Self::new(e, a, b, c, d)
    }

    pub fn e(&self) -> &RMat {
        &self.e
    }
    pub fn a(&self) -> &RMat {
        &self.a
    }
    pub fn b(&self) -> &RMat {
        &self.b
    }
    pub fn c(&self) -> &RMat {
        &self.c
    }
    pub fn d(&self) -> &RMat {
        &self.d
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn with_feedthrough(&self, d: RMat) -> Result<Self> {
        Self::new(self.e.clone(), self.a.clone(), self.b.clone(), self.c.clone(), d)
    }

    pub fn into_parts(self) -> (RMat, RMat, RMat, RMat, RMat) {
        (self.e, self.a, self.b, self.c, self.d)
    }

    /// Factorization of `sE − A`.
    pub fn resolvent(&self, s: C64) -> Result<Lu> {
        let m = to_complex(&self.e) * s - to_complex(&self.a);
        let lu = Lu::new(m);
        if lu.is_singular() {
            Err(MorError::SingularPencil(s))
        } else {
            Ok(lu)
        }
    }

    /// `H(s) = C (sE − A)^{-1} B + D`.
    pub fn transfer(&self, s: C64) -> Result<CMat> {
        let lu = self.resolvent(s)?;
        let x = lu.solve(&to_complex(&self.b));
        Ok(to_complex(&self.c) * x + to_complex(&self.d))
    }

    /// `H'(s) = −C (sE − A)^{-1} E (sE − A)^{-1} B`.
    pub fn transfer_derivative(&self, s: C64) -> Result<CMat> {
        Ok(self.transfer_with_derivative(s)?.1)
    }

    pub fn transfer_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        let lu = self.resolvent(s)?;
        let c = to_complex(&self.c);
        let x = lu.solve(&to_complex(&self.b));
        let y = lu.solve(&(to_complex(&self.e) * &x));
        Ok((&c * x + to_complex(&self.d), -(c * y)))
    }

    /// `H^{(k)}(s) = (−1)^k k! C [(sE − A)^{-1} E]^k (sE − A)^{-1} B` (+ D for k = 0).
    pub fn transfer_kth_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        let lu = self.resolvent(s)?;
        let e = to_complex(&self.e);
        let mut x = lu.solve(&to_complex(&self.b));
        let mut fact = 1.0;
        for j in 1..=k {
            x = lu.solve(&(&e * x));
            fact *= -(j as f64);
        }
        let mut h = to_complex(&self.c) * x * C64::new(fact, 0.0);
        if k == 0 {
            h += to_complex(&self.d);
        }
        Ok(h)
    }

    pub fn is_e_singular(&self) -> bool {
        let s = linalg::singular_values(&self.e);
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) => hi == 0.0 || lo <= 1e-12 * hi,
            _ => false,
        }
    }

    /// Finite eigenvalues of the pencil `λE − A` plus the count of infinite ones.
    pub fn pencil_spectrum(&self) -> Result<PencilSpectrum> {
        pencil_spectrum(&self.e, &self.a)
    }

    /// Stability of the finite spectrum (infinite eigenvalues ignored).
    pub fn is_stable(&self) -> Result<StabilityReport> {
        let spec = self.pencil_spectrum()?;
        let abscissa = spec
            .finite
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(StabilityReport {
            stable: abscissa < 0.0 || spec.finite.is_empty(),
            abscissa,
            infinite_eigenvalues: spec.infinite,
        })
    }

    /// Pole-residue expansion `Σ ℓ_i r_iᵀ/(s − λ_i) + D` for nonsingular `E`.
    pub fn pole_residue(&self) -> Result<PoleResidueForm> {
        if self.is_e_singular() {
            return Err(MorError::SingularE);
        }
        pole_residue_complex(
            &to_complex(&self.e),
            &to_complex(&self.a),
            &to_complex(&self.b),
            &to_complex(&self.c),
            &self.d,
            true,
        )
    }

    /// Equivalent system with `E = I` (requires nonsingular `E`).
    pub fn to_standard(&self) -> Result<DescriptorSystem> {
        if self.is_e_singular() {
            return Err(MorError::SingularE);
        }
        let lu = self.e.clone().lu();
        let a = lu.solve(&self.a).ok_or(MorError::SingularE)?;
        let b = lu.solve(&self.b).ok_or(MorError::SingularE)?;
        DescriptorSystem::from_state_space(a, b, self.c.clone(), self.d.clone())
    }

    /// Realization of `H − H_r` by block-diagonal stacking.
    pub fn error_system(&self, other: &DescriptorSystem) -> Result<DescriptorSystem> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(MorError::DimensionMismatch("error system I/O dimensions".into()));
        }
        let (n, r) = (self.order(), other.order());
        let blk = |x: &RMat, y: &RMat| {
            let mut m = RMat::zeros(n + r, n + r);
            m.view_mut((0, 0), (n, n)).copy_from(x);
            m.view_mut((n, n), (r, r)).copy_from(y);
            m
        };
        let mut b = RMat::zeros(n + r, self.inputs());
        b.view_mut((0, 0), (n, self.inputs())).copy_from(&self.b);
        b.view_mut((n, 0), (r, self.inputs())).copy_from(&other.b);
        let mut c = RMat::zeros(self.outputs(), n + r);
        c.view_mut((0, 0), (self.outputs(), n)).copy_from(&self.c);
        c.view_mut((0, n), (self.outputs(), r)).copy_from(&(-&other.c));
        DescriptorSystem::new(
            blk(&self.e, &other.e),
            blk(&self.a, &other.a),
            b,
            c,
            &self.d - &other.d,
        )
    }

    /// H2 norm. Uses `‖H‖² = Σ_k ℓ_kᵀ H(−λ_k) r_k`; falls back to the
    /// controllability Gramian when the poles are not distinct.
    pub fn h2_norm(&self) -> Result<f64> {
        if self.d.iter().any(|&x| x != 0.0) {
            return Err(MorError::NonzeroFeedthrough);
        }
        if self.is_e_singular() {
            return Err(MorError::SingularE);
        }
        let st = self.is_stable()?;
        if !st.stable {
            return Err(MorError::UnstableSystem { abscissa: st.abscissa });
        }
        if self.order() == 0 {
            return Ok(0.0);
        }
        match self.pole_residue() {
            Ok(pr) => {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..pr.order() {
                    let h = pr.eval(-pr.poles[k])?;
                    acc += (pr.left[k].transpose() * h * &pr.right[k])[(0, 0)];
                }
                Ok(acc.re.max(0.0).sqrt())
            }
            Err(MorError::RepeatedPoles { .. }) => self.h2_norm_gramian(),
            Err(e) => Err(e),
        }
    }

    /// H2 norm from the controllability Gramian of the `E = I` form.
    pub fn h2_norm_gramian(&self) -> Result<f64> {
        let std = self.to_standard()?;
        let q = std.b() * std.b().transpose();
        let p = linalg::lyapunov(std.a(), &q)?;
        let val = (std.c() * p * std.c().transpose()).trace();
        Ok(val.max(0.0).sqrt())
    }

    /// Sampled H∞ norm with the default grid; see [`DescriptorSystem::hinf_estimate`].
    pub fn hinf_norm(&self) -> Result<f64> {
        Ok(self.hinf_estimate(&HinfOptions::default())?.norm)
    }

    /// Lower-bound estimate of `sup_ω σ_max(H(iω))`.
    ///
    /// Samples a logarithmic grid spanning two decades beyond the pole
    /// magnitudes (`points_per_decade` per decade), the imaginary parts of
    /// the poles and `ω = 0`, then refines every local maximum by
    /// golden-section search.
    pub fn hinf_estimate(&self, opts: &HinfOptions) -> Result<HinfEstimate> {
        let spec = self.pencil_spectrum()?;
        let abscissa = spec.finite.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if !spec.finite.is_empty() && abscissa >= 0.0 {
            return Err(MorError::UnstableSystem { abscissa });
        }
        let mags: Vec<f64> = spec.finite.iter().map(|z| z.norm()).filter(|&x| x > 0.0).collect();
        let (lo, hi) = if mags.is_empty() {
            (1e-3, 1e3)
        } else {
            let mn = mags.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = mags.iter().cloned().fold(0.0, f64::max);
            (mn * 1e-2, mx * 1e2)
        };
        let extra: Vec<f64> = spec.finite.iter().map(|z| z.im.abs()).filter(|&w| w > 0.0).collect();
        let mut est = hinf_sampled(self, lo, hi, opts.points_per_decade, &extra)?;
        if !spec.infinite_count_positive() {
            let dinf = linalg::singular_values(&self.d).first().copied().unwrap_or(0.0);
            if dinf > est.norm {
                est.norm = dinf;
                est.peak_frequency = f64::INFINITY;
            }
        }
        Ok(est)
    }
}

impl TransferFunction for DescriptorSystem {
    fn inputs(&self) -> usize {
        self.b.ncols()
    }
    fn outputs(&self) -> usize {
        self.c.nrows()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        self.transfer(s)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        self.transfer_with_derivative(s)
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        self.transfer_kth_derivative(s, k)
    }
}

impl DescriptorSystem {
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Largest real part over the finite eigenvalues (−∞ if there are none).
    pub abscissa: f64,
    pub infinite_eigenvalues: usize,
}

#[derive(Clone, Debug)]
pub struct PencilSpectrum {
    pub finite: Vec<C64>,
    pub infinite: usize,
}

impl PencilSpectrum {
    fn infinite_count_positive(&self) -> bool {
        self.infinite > 0
    }
}

/// Eigenvalues of `λE − A`. Uses `E^{-1}A` when `E` is well conditioned and
/// a shift-and-invert transform otherwise.
pub fn pencil_spectrum(e: &RMat, a: &RMat) -> Result<PencilSpectrum> {
    let n = a.nrows();
    if n == 0 {
        return Ok(PencilSpectrum { finite: vec![], infinite: 0 });
    }
    if linalg::inverse_condition(e) > 1e-10 {
        let lu = Lu::from_real(e);
        let m = lu.solve(&to_complex(a));
        return Ok(PencilSpectrum { finite: linalg::eigenvalues(&m)?, infinite: 0 });
    }
    let (s0, lu) = regular_shift(e, a)?;
    let m = linalg::real_part(&lu.solve(&to_complex(e)));
    let n_inf = infinite_dimension(&m);
    let mut mu = linalg::eigenvalues(&to_complex(&m))?;
    mu.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap());
    let finite = mu[n_inf..].iter().map(|&z| C64::new(s0, 0.0) - z.inv()).collect();
    Ok(PencilSpectrum { finite, infinite: n_inf })
}

/// A real shift `s0` with `s0 E − A` nonsingular, and its factorization.
pub(crate) fn regular_shift(e: &RMat, a: &RMat) -> Result<(f64, Lu)> {
    let scale = {
        let ne = e.norm();
        let na = a.norm();
        if ne > 0.0 && na > 0.0 {
            na / ne
        } else {
            1.0
        }
    };
    for f in [0.7390851332, -1.3247179572, 2.5029078750, -0.4142135624, 3.3598856662, 0.1] {
        let s0 = f * scale;
        let lu = Lu::from_real(&(e * s0 - a));
        if !lu.is_singular() && lu.pivot_ratio() > 1e-13 {
            return Ok((s0, lu));
        }
    }
    Err(MorError::SingularPencilFamily)
}

/// Dimension of the generalized null space of `M = (s0E − A)^{-1}E`,
/// i.e. the number of infinite eigenvalues of the pencil.
pub(crate) fn infinite_dimension(m: &RMat) -> usize {
    let n = m.nrows();
    let mut power = m.clone();
    let mut prev = nullity(&power);
    if prev == 0 {
        return 0;
    }
    for _ in 1..n {
        power = &power * m;
        let cur = nullity(&power);
        if cur == prev {
            break;
        }
        prev = cur;
    }
    prev
}

pub(crate) fn nullity(m: &RMat) -> usize {
    let s = linalg::singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return m.ncols();
    }
    s.iter().filter(|&&x| x <= 1e-10 * smax).count()
}

/// Residue directions `(ℓ_i, r_i)` and distinct poles `λ_i`:
/// `H(s) = Σ ℓ_i r_iᵀ/(s − λ_i) + D`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleResidueForm {
    pub poles: Vec<C64>,
    pub left: Vec<CVec>,
    pub right: Vec<CVec>,
    pub feedthrough: RMat,
}

impl PoleResidueForm {
    pub fn new(poles: Vec<C64>, left: Vec<CVec>, right: Vec<CVec>, feedthrough: RMat) -> Result<Self> {
        let r = poles.len();
        if left.len() != r || right.len() != r {
            return Err(MorError::DimensionMismatch("pole/direction counts differ".into()));
        }
        let (p, m) = feedthrough.shape();
        if left.iter().any(|l| l.len() != p) || right.iter().any(|v| v.len() != m) {
            return Err(MorError::DimensionMismatch("residue direction lengths".into()));
        }
        Ok(PoleResidueForm { poles, left, right, feedthrough })
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn residue(&self, i: usize) -> CMat {
        &self.left[i] * self.right[i].transpose()
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.poles.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|z| z.re < 0.0)
    }

    /// Smallest pairwise pole gap relative to the spectral radius.
    pub fn relative_pole_gap(&self) -> f64 {
        relative_gap(&self.poles)
    }

    pub fn check_distinct(&self) -> Result<()> {
        let gap = self.relative_pole_gap();
        if gap < POLE_GAP_TOL {
            Err(MorError::RepeatedPoles { gap })
        } else {
            Ok(())
        }
    }

    /// Real block-diagonal realization; requires conjugate pairs to carry
    /// conjugated residue directions.
    pub fn to_descriptor(&self) -> Result<DescriptorSystem> {
        let r = self.order();
        let (p, m) = self.feedthrough.shape();
        let pairing = linalg::conjugate_pairing(&self.poles, 1e-10).ok_or(MorError::NotConjugateClosed)?;
        let mut a = RMat::zeros(r, r);
        let mut b = RMat::zeros(r, m);
        let mut c = RMat::zeros(p, r);
        let mut k = 0;
        for pr in &pairing {
            match *pr {
                linalg::Pairing::Real(i) => {
                    a[(k, k)] = self.poles[i].re;
                    for j in 0..m {
                        b[(k, j)] = self.right[i][j].re;
                    }
                    for j in 0..p {
                        c[(j, k)] = self.left[i][j].re;
                    }
                    k += 1;
                }
                linalg::Pairing::Pair(i, j2) => {
                    let tol = 1e-8 * (self.left[i].norm() + self.right[i].norm());
                    if (self.left[j2].map(|z| z.conj()) - &self.left[i]).norm() > tol
                        || (self.right[j2].map(|z| z.conj()) - &self.right[i]).norm() > tol
                    {
                        return Err(MorError::NotConjugateClosed);
                    }
                    let lam = self.poles[i];
                    a[(k, k)] = lam.re;
                    a[(k, k + 1)] = -lam.im;
                    a[(k + 1, k)] = lam.im;
                    a[(k + 1, k + 1)] = lam.re;
                    for j in 0..m {
                        b[(k, j)] = self.right[i][j].re;
                        b[(k + 1, j)] = self.right[i][j].im;
                    }
                    for j in 0..p {
                        c[(j, k)] = 2.0 * self.left[i][j].re;
                        c[(j, k + 1)] = -2.0 * self.left[i][j].im;
                    }
                    k += 2;
                }
            }
        }
        DescriptorSystem::from_state_space(a, b, c, self.feedthrough.clone())
    }
}

impl TransferFunction for PoleResidueForm {
    fn inputs(&self) -> usize {
        self.feedthrough.ncols()
    }
    fn outputs(&self) -> usize {
        self.feedthrough.nrows()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        self.eval_derivative(s, 0)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        Ok((self.eval_derivative(s, 0)?, self.eval_derivative(s, 1)?))
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        let mut h = if k == 0 {
            to_complex(&self.feedthrough)
        } else {
            CMat::zeros(self.outputs(), self.inputs())
        };
        let mut fact = 1.0;
        for j in 1..=k {
            fact *= -(j as f64);
        }
        for i in 0..self.order() {
            let d = s - self.poles[i];
            if d.norm() == 0.0 {
                return Err(MorError::SingularPencil(s));
            }
            let w = C64::new(fact, 0.0) / d.powu(k as u32 + 1);
            h += self.residue(i) * w;
        }
        Ok(h)
    }
}

/// Relative separation below which poles are treated as repeated.
pub const POLE_GAP_TOL: f64 = 1e-8;

fn relative_gap(poles: &[C64]) -> f64 {
    if poles.len() < 2 {
        return f64::INFINITY;
    }
    let radius = poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut gap = f64::INFINITY;
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            gap = gap.min((poles[i] - poles[j]).norm());
        }
    }
    if radius == 0.0 {
        0.0
    } else {
        gap / radius
    }
}

/// Pole-residue expansion of the (possibly complex) realization
/// `C (sE − A)^{-1} B + D` with nonsingular `E`.
///
/// With `real_symmetric`, poles are paired with their conjugates and the
/// residue directions of each pair are made exact conjugates; real poles get
/// real directions.
pub fn pole_residue_complex(
    e: &CMat,
    a: &CMat,
    b: &CMat,
    c: &CMat,
    d: &RMat,
    real_symmetric: bool,
) -> Result<PoleResidueForm> {
    let r = a.nrows();
    let (p, m) = (c.nrows(), b.ncols());
    let elu = Lu::new(e.clone());
    if elu.is_singular() || linalg::singular_values_c(e).last().copied().unwrap_or(1.0)
        <= 1e-13 * linalg::singular_values_c(e).first().copied().unwrap_or(1.0)
    {
        return Err(MorError::SingularE);
    }
    let ma = elu.solve(a);
    let mb = elu.solve(b);
    let (mut vals, vecs) = eig(&ma)?;
    let gap = relative_gap(&vals);
    if gap < POLE_GAP_TOL {
        return Err(MorError::RepeatedPoles { gap });
    }
    let xlu = Lu::new(vecs.clone());
    if xlu.is_singular() {
        return Err(MorError::RepeatedPoles { gap });
    }
    let rows = xlu.solve(&mb); // X^{-1} E^{-1} B
    let cx = c * &vecs;
    let mut left: Vec<CVec> = (0..r).map(|i| cx.column(i).into_owned()).collect();
    let mut right: Vec<CVec> = (0..r).map(|i| rows.row(i).transpose().into_owned()).collect();
    for i in 0..r {
        balance(&mut left[i], &mut right[i]);
    }

    if real_symmetric {
        let scale = vals.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let pairing = pair_spectrum(&vals, scale);
        if let Some(pairing) = pairing {
            for pr in &pairing {
                match *pr {
                    linalg::Pairing::Real(i) => {
                        vals[i] = C64::new(vals[i].re, 0.0);
                        left[i] = left[i].map(|z| C64::new(z.re, 0.0));
                        right[i] = right[i].map(|z| C64::new(z.re, 0.0));
                    }
                    linalg::Pairing::Pair(i, j) => {
                        vals[j] = vals[i].conj();
                        left[j] = left[i].map(|z| z.conj());
                        right[j] = right[i].map(|z| z.conj());
                    }
                }
            }
        }
    }

    // deterministic order: by real part, then imaginary part with +Im first in a pair
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        let (x, y) = (vals[i], vals[j]);
        let key = |z: C64| (z.re, z.im.abs(), -z.im.signum());
        key(x).partial_cmp(&key(y)).unwrap()
    });
    let poles = order.iter().map(|&i| vals[i]).collect();
    let left = order.iter().map(|&i| left[i].clone()).collect();
    let right = order.iter().map(|&i| right[i].clone()).collect();
    let _ = (p, m);
    PoleResidueForm::new(poles, left, right, d.clone())
}

/// Equalize `‖ℓ‖ = ‖r‖` and rotate the phase so the largest entry of `ℓ` is
/// real and positive.
fn balance(l: &mut CVec, r: &mut CVec) {
    let (nl, nr) = (l.norm(), r.norm());
    if nl > 0.0 && nr > 0.0 {
        let alpha = (nr / nl).sqrt();
        *l *= C64::new(alpha, 0.0);
        *r /= C64::new(alpha, 0.0);
    }
    let mut best = C64::new(0.0, 0.0);
    for z in l.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() > 0.0 {
        let phase = best / C64::new(best.norm(), 0.0);
        *l /= phase;
        *r *= phase;
    }
}

/// Pair the eigenvalues of a real-coefficient problem into conjugate pairs
/// and real singletons. Eigenvalues whose imaginary part is at roundoff
/// level are real.
fn pair_spectrum(vals: &[C64], scale: f64) -> Option<Vec<linalg::Pairing>> {
    let real_tol = 1e-10 * scale;
    let adjusted: Vec<C64> = vals
        .iter()
        .map(|z| if z.im.abs() <= real_tol { C64::new(z.re, 0.0) } else { *z })
        .collect();
    linalg::conjugate_pairing(&adjusted, 1e-7)
}

/// Options for the sampled H∞ estimate.
#[derive(Clone, Debug)]
pub struct HinfOptions {
    pub points_per_decade: usize,
}

impl Default for HinfOptions {
    fn default() -> Self {
        HinfOptions { points_per_decade: 50 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HinfEstimate {
    pub norm: f64,
    pub peak_frequency: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points_per_decade: usize,
}

pub(crate) fn sigma_max(h: &CMat) -> f64 {
    linalg::singular_values_c(h).first().copied().unwrap_or(0.0)
}

/// Sampled `sup_ω σ_max(H(iω))` on `[lo, hi]` (log grid) plus `ω = 0` and
/// the given extra frequencies, with golden-section refinement of the peaks.
pub fn hinf_sampled<T: TransferFunction + ?Sized>(
    tf: &T,
    lo: f64,
    hi: f64,
    points_per_decade: usize,
    extra: &[f64],
) -> Result<HinfEstimate> {
    let decades = (hi / lo).log10().max(0.0);
    let npts = ((decades * points_per_decade as f64).ceil() as usize).max(2);
    let mut omegas: Vec<f64> = (0..=npts)
        .map(|i| lo * 10f64.powf(decades * i as f64 / npts as f64))
        .collect();
    omegas.extend(extra.iter().copied().filter(|w| w.is_finite() && *w > 0.0));
    omegas.push(0.0);
    omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    omegas.dedup();
    let g = |w: f64| -> Result<f64> { Ok(sigma_max(&tf.eval(C64::new(0.0, w))?)) };
    let vals: Vec<f64> = omegas.iter().map(|&w| g(w)).collect::<Result<_>>()?;
    let mut best = (vals[0], omegas[0]);
    for i in 0..omegas.len() {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < omegas.len() { vals[i + 1] } else { f64::NEG_INFINITY };
        if vals[i] >= left && vals[i] >= right {
            let a = if i > 0 { omegas[i - 1] } else { omegas[i] };
            let b = if i + 1 < omegas.len() { omegas[i + 1] } else { omegas[i] };
            let (v, w) = golden_max(&g, a, b, (vals[i], omegas[i]))?;
            if v > best.0 {
                best = (v, w);
            }
        }
    }
    Ok(HinfEstimate {
        norm: best.0,
        peak_frequency: best.1,
        omega_min: lo,
        omega_max: hi,
        points_per_decade,
    })
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, start: (f64, f64)) -> Result<(f64, f64)> {
    let mut best = start;
    if b <= a {
        return Ok(best);
    }
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - gr * (b - a);
    let mut x2 = a + gr * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..80 {
        if (b - a) <= 1e-12 * b.abs().max(1e-300) {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2)?;
        }
    }
    for (v, w) in [(f1, x1), (f2, x2)] {
        if v > best.0 {
            best = (v, w);
        }
    }
    Ok(best)
}

/// Column vector helper.
pub fn cvec(data: &[C64]) -> CVec {
    DVector::from_column_slice(data)
}
