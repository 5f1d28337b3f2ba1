//! Loewner realizations from transfer-function samples and TF-IRKA.

use crate::error::{MorError, Result};
use crate::h2::{self, IrkaConfig, IrkaInit, IrkaIteration, OptimalityReport};
use crate::interp::{self, TangentData};
use crate::linalg::{self, Lu};
use crate::lti::{pole_residue_complex, DescriptorSystem, PoleResidueForm, TransferFunction};
use crate::{CMat, CVec, RMat, C64};

/// Complex realization `C_r (sE_r − A_r)^{-1} B_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoewnerRealization {
    pub e: CMat,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    /// `(σ_i, r_i, ℓ_i)` per state, kept for realification.
    data: Vec<CVec>,
}

impl LoewnerRealization {
    pub fn order(&self) -> usize {
        self.e.nrows()
    }

    fn resolvent(&self, s: C64) -> Result<Lu> {
        let lu = Lu::new(&self.e * s - &self.a);
        if lu.is_singular() {
            Err(MorError::SingularLoewnerPencil(s))
        } else {
            Ok(lu)
        }
    }

    /// Probe `sE_r − A_r` away from the data; a singular pencil means the
    /// data carries less than `r` degrees of freedom.
    pub fn check_regular(&self) -> Result<()> {
        let scale = self.data.iter().map(|v| v[0].norm()).fold(0.0, f64::max);
        self.resolvent(C64::new(0.6180339887, 0.7548776662) * (1.0 + scale)).map(|_| ())
    }

    pub fn pole_residue(&self) -> Result<PoleResidueForm> {
        let d = RMat::zeros(self.c.nrows(), self.b.ncols());
        pole_residue_complex(&self.e, &self.a, &self.b, &self.c, &d, true)
    }

    /// Equivalent real descriptor system; needs conjugate-closed data.
    pub fn to_real(&self) -> Result<DescriptorSystem> {
        let pairing = interp::conjugate_column_pairing(&interp::stack_columns(0, &self.data), 1e-12)?;
        let t = linalg::pairing_transform(&pairing, self.order());
        let tt = t.transpose();
        let re = |m: CMat| m.map(|z| z.re);
        DescriptorSystem::strictly_proper(
            re(&tt * &self.e * &t),
            re(&tt * &self.a * &t),
            re(&tt * &self.b),
            re(&self.c * &t),
        )
    }
}

impl TransferFunction for LoewnerRealization {
    fn inputs(&self) -> usize {
        self.b.ncols()
    }
    fn outputs(&self) -> usize {
        self.c.nrows()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        let lu = self.resolvent(s)?;
        Ok(&self.c * lu.solve(&self.b))
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        let lu = self.resolvent(s)?;
        let x = lu.solve(&self.b);
        let y = lu.solve(&(&self.e * &x));
        Ok((&self.c * x, -(&self.c * y)))
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        let lu = self.resolvent(s)?;
        let mut x = lu.solve(&self.b);
        let mut fact = 1.0;
        for j in 1..=k {
            x = lu.solve(&(&self.e * x));
            fact *= -(j as f64);
        }
        Ok(&self.c * x * C64::new(fact, 0.0))
    }
}

/// Loewner pencil for data with `σ_i = μ_i`:
///
/// * `(E_r)_{ij} = −ℓ_iᵀ(H(σ_i) − H(σ_j))r_j / (σ_i − σ_j)`, `(E_r)_{ii} = −ℓ_iᵀH'(σ_i)r_i`
/// * `(A_r)_{ij} = −ℓ_iᵀ(σ_iH(σ_i) − σ_jH(σ_j))r_j / (σ_i − σ_j)`, `(A_r)_{ii} = −ℓ_iᵀ(H + σ_iH')(σ_i)r_i`
/// * rows of `B_r` are `ℓ_iᵀH(σ_i)`, columns of `C_r` are `H(σ_i)r_i`.
pub fn loewner_build<T: TransferFunction + ?Sized>(samples: &T, data: &TangentData) -> Result<LoewnerRealization> {
    let r = data.right_points.len();
    if data.left_points.len() != r
        || data.right_points.iter().zip(&data.left_points).any(|(a, b)| a != b)
    {
        return Err(MorError::InvalidInput("Loewner data needs coinciding right and left points".into()));
    }
    if data.right_orders.iter().chain(&data.left_orders).any(|&k| k != 1) {
        return Err(MorError::InvalidInput("Loewner data must be first order".into()));
    }
    data.check_dims(samples.inputs(), samples.outputs())?;
    let pts = &data.right_points;
    let scale = pts.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..r {
        for j in (i + 1)..r {
            if (pts[i] - pts[j]).norm() < 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(MorError::DuplicatePoints(pts[i], pts[j]));
            }
        }
    }
    let mut hs = Vec::with_capacity(r);
    let mut dhs = Vec::with_capacity(r);
    for &s in pts {
        let (h, dh) = samples
            .eval_with_derivative(s)
            .map_err(|e| MorError::EvaluationFailure(format!("at {s}: {e}")))?;
        if h.iter().chain(dh.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MorError::EvaluationFailure(format!("non-finite sample at {s}")));
        }
        hs.push(h);
        dhs.push(dh);
    }
    let (m, p) = (samples.inputs(), samples.outputs());
    let rr = &data.right_dirs;
    let ll = &data.left_dirs;
    // ℓ_iᵀH(σ_i) and H(σ_j)r_j
    let lh: Vec<nalgebra::RowDVector<C64>> = (0..r).map(|i| ll[i].transpose() * &hs[i]).collect();
    let hr: Vec<CVec> = (0..r).map(|j| &hs[j] * &rr[j]).collect();
    let mut e = CMat::zeros(r, r);
    let mut a = CMat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            if i == j {
                let d = (ll[i].transpose() * &dhs[i] * &rr[i])[(0, 0)];
                let h = (&lh[i] * &rr[i])[(0, 0)];
                e[(i, i)] = -d;
                a[(i, i)] = -(h + pts[i] * d);
            } else {
                let hi = (&lh[i] * &rr[j])[(0, 0)];
                let hj = ll[i].dot(&hr[j]);
                let den = pts[i] - pts[j];
                e[(i, j)] = -(hi - hj) / den;
                a[(i, j)] = -(pts[i] * hi - pts[j] * hj) / den;
            }
        }
    }
    let mut b = CMat::zeros(r, m);
    for i in 0..r {
        b.set_row(i, &lh[i]);
    }
    let mut c = CMat::zeros(p, r);
    for j in 0..r {
        c.set_column(j, &hr[j]);
    }
    let tags = (0..r)
        .map(|i| {
            let mut v = vec![pts[i]];
            v.extend(rr[i].iter());
            v.extend(ll[i].iter());
            CVec::from_vec(v)
        })
        .collect();
    Ok(LoewnerRealization { e, a, b, c, data: tags })
}

/// Samples `H(s)`, `H'(s)` given at fixed points; conjugate points are served
/// by conjugation.
#[derive(Clone, Debug)]
pub struct TabulatedSamples {
    pub points: Vec<C64>,
    pub values: Vec<CMat>,
    pub derivatives: Vec<CMat>,
}

impl TabulatedSamples {
    pub fn new(points: Vec<C64>, values: Vec<CMat>, derivatives: Vec<CMat>) -> Result<Self> {
        if values.len() != points.len() || derivatives.len() != points.len() || points.is_empty() {
            return Err(MorError::DimensionMismatch("one value and derivative per point".into()));
        }
        let shape = values[0].shape();
        if values.iter().chain(&derivatives).any(|v| v.shape() != shape) {
            return Err(MorError::DimensionMismatch("sample matrices must share a shape".into()));
        }
        Ok(TabulatedSamples { points, values, derivatives })
    }

    fn lookup(&self, s: C64) -> Result<(CMat, CMat)> {
        let tol = |z: C64| 1e-12 * z.norm().max(1.0);
        for (k, &p) in self.points.iter().enumerate() {
            if (p - s).norm() <= tol(p) {
                return Ok((self.values[k].clone(), self.derivatives[k].clone()));
            }
            if (p.conj() - s).norm() <= tol(p) {
                let cj = |m: &CMat| m.map(|z| z.conj());
                return Ok((cj(&self.values[k]), cj(&self.derivatives[k])));
            }
        }
        Err(MorError::EvaluationFailure(format!("no tabulated sample at {s}")))
    }
}

impl TransferFunction for TabulatedSamples {
    fn inputs(&self) -> usize {
        self.values[0].ncols()
    }
    fn outputs(&self) -> usize {
        self.values[0].nrows()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        Ok(self.lookup(s)?.0)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        self.lookup(s)
    }
}

#[derive(Clone, Debug)]
pub struct TfIrkaResult {
    pub realization: LoewnerRealization,
    /// Real form of the final model when the shifts are conjugate closed.
    pub reduced: Option<DescriptorSystem>,
    pub pole_residue: PoleResidueForm,
    pub history: Vec<IrkaIteration>,
    pub converged: bool,
    pub optimality: OptimalityReport,
}

/// IRKA driven only by evaluations of `H` and `H'`.
pub fn tf_irka<T: TransferFunction + ?Sized>(samples: &T, cfg: &IrkaConfig) -> Result<TfIrkaResult> {
    cfg.validate()?;
    let init = match &cfg.init {
        IrkaInit::Given(s) => {
            if s.shifts.len() != cfg.order {
                return Err(MorError::InvalidInput("initial shift count must equal the order".into()));
            }
            let d = s.tangent_data()?;
            d.check_dims(samples.inputs(), samples.outputs())?;
            if !d.is_conjugate_closed() {
                return Err(MorError::NotConjugateClosed);
            }
            s.clone()
        }
        IrkaInit::LogGrid => h2::log_grid(
            cfg.shift_range.unwrap_or((0.1, 10.0)),
            samples.inputs(),
            samples.outputs(),
            cfg.order,
            cfg.seed,
        ),
        IrkaInit::Auto => {
            let range = match cfg.shift_range {
                Some(rg) => rg,
                None => {
                    let wb = bandwidth(samples)?;
                    (wb / 30.0, wb * 30.0)
                }
            };
            band_shifts(range, samples.inputs(), samples.outputs(), cfg.order, cfg.seed)
        }
    };
    let out = h2::irka_loop(init, cfg, |data| {
        let real = loewner_build(samples, data)?;
        real.check_regular()?;
        let pr = real.pole_residue()?;
        Ok((real, pr))
    })?;
    let optimality = h2::optimality_residuals(samples, &out.pole_residue)?;
    let reduced = out.model.to_real().ok();
    Ok(TfIrkaResult {
        realization: out.model,
        reduced,
        pole_residue: out.pole_residue,
        history: out.history,
        converged: out.converged,
        optimality,
    })
}

/// First frequency on a log grid over `[1e-4, 1e6]` where `σ_max(H(iω))`
/// falls below `1/√2` of its low-frequency value; `1` if it never does.
fn bandwidth<T: TransferFunction + ?Sized>(samples: &T) -> Result<f64> {
    let sig = |w: f64| -> Result<f64> {
        let h = samples.eval(C64::new(0.0, w))?;
        Ok(linalg::singular_values_c(&h).first().copied().unwrap_or(0.0))
    };
    let dc = sig(1e-4)?;
    for k in 1..=100 {
        let w = 10f64.powf(-4.0 + 0.1 * k as f64);
        if sig(w)? < dc * std::f64::consts::FRAC_1_SQRT_2 {
            return Ok(w);
        }
    }
    Ok(1.0)
}

/// Conjugate pairs `ω(0.3 ± i)` with `ω` log-spaced over `range`, plus one
/// real shift at the geometric mean for odd `r`; seeded real directions.
fn band_shifts(range: (f64, f64), m: usize, p: usize, r: usize, seed: u64) -> h2::ShiftSet {
    let grid = h2::log_grid(range, m, p, r, seed);
    let (lo, hi) = range;
    let k = r / 2;
    let mut shifts = Vec::with_capacity(r);
    for j in 0..k {
        let t = if k == 1 { 0.5 } else { j as f64 / (k - 1) as f64 };
        let w = lo * (hi / lo).powf(t);
        shifts.push(C64::new(0.3 * w, w));
        shifts.push(C64::new(0.3 * w, -w));
    }
    if r % 2 == 1 {
        shifts.push(C64::new((lo * hi).sqrt(), 0.0));
    }
    let mut right = grid.right;
    let mut left = grid.left;
    for j in 0..k {
        right[2 * j + 1] = right[2 * j].clone();
        left[2 * j + 1] = left[2 * j].clone();
    }
    h2::ShiftSet { shifts, right, left }
}

/// Bitangential data helper with `σ_i = μ_i`.
pub fn hermite_data(points: Vec<C64>, right: Vec<CVec>, left: Vec<CVec>) -> Result<TangentData> {
    TangentData::bitangential(points, right, left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::verify_interpolation;
    use crate::lti::DescriptorSystem;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn lag() -> DescriptorSystem {
        DescriptorSystem::from_state_space(
            RMat::from_element(1, 1, -1.0),
            RMat::from_element(1, 1, 1.0),
            RMat::from_element(1, 1, 1.0),
            RMat::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn first_order_lag_pencil() {
        let one = CVec::from_element(1, c(1.0));
        let data = hermite_data(vec![c(1.0), c(2.0)], vec![one.clone(), one.clone()], vec![one.clone(), one]).unwrap();
        let l = loewner_build(&lag(), &data).unwrap();
        let want_e = [[0.25, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 9.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((l.e[(i, j)] - c(want_e[i][j])).norm() < 1e-15);
                assert!((l.a[(i, j)] + c(want_e[i][j])).norm() < 1e-15);
            }
        }
        assert!((l.b[(0, 0)] - c(0.5)).norm() < 1e-15 && (l.b[(1, 0)] - c(1.0 / 3.0)).norm() < 1e-15);
        assert!((l.c[(0, 0)] - c(0.5)).norm() < 1e-15 && (l.c[(0, 1)] - c(1.0 / 3.0)).norm() < 1e-15);
        // two samples of a first-order function: the pencil is singular
        assert!(matches!(l.check_regular(), Err(MorError::SingularLoewnerPencil(_))));
    }

    #[test]
    fn duplicate_points_rejected() {
        let one = CVec::from_element(1, c(1.0));
        let data = hermite_data(vec![c(1.0), c(1.0)], vec![one.clone(), one.clone()], vec![one.clone(), one]).unwrap();
        assert!(matches!(loewner_build(&lag(), &data), Err(MorError::DuplicatePoints(..))));
    }

    #[test]
    fn conjugate_data_gives_real_system() {
        let sys = crate::models::three_state_example();
        let r = CVec::from_vec(vec![C64::new(0.3, 1.0), c(-0.5)]);
        let l = CVec::from_vec(vec![c(1.0), C64::new(0.2, -0.7)]);
        let s = C64::new(1.0, 1.0);
        let data = hermite_data(
            vec![s, s.conj()],
            vec![r.clone(), r.map(|z| z.conj())],
            vec![l.clone(), l.map(|z| z.conj())],
        )
        .unwrap();
        let real = loewner_build(&sys, &data).unwrap();
        let rep = verify_interpolation(&sys, &real, &data).unwrap();
        assert!(rep.all_below(1e-10), "{rep:?}");
        let rs = real.to_real().unwrap();
        for p in [c(0.5), C64::new(0.2, 3.0)] {
            assert!((rs.transfer(p).unwrap() - real.eval(p).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn tabulated_lookup() {
        let t = TabulatedSamples::new(
            vec![C64::new(1.0, 2.0)],
            vec![CMat::from_element(1, 1, C64::new(0.0, 1.0))],
            vec![CMat::from_element(1, 1, c(2.0))],
        )
        .unwrap();
        assert_eq!(t.eval(C64::new(1.0, -2.0)).unwrap()[(0, 0)], C64::new(0.0, -1.0));
        assert!(matches!(t.eval(c(3.0)), Err(MorError::EvaluationFailure(_))));
    }
}
