//! Input-weighted H2 machinery: the `𝔉` map and its realization, weighted
//! error norms, and residuals of the weighted first-order conditions.

use serde::Serialize;

use crate::error::{MorError, Result};
use crate::h2::{self, OptimalityReport};
use crate::linalg::{self, Lu};
use crate::lti::{self, DescriptorSystem, PoleResidueForm, TransferFunction};
use crate::{CMat, RMat, C64};

/// `W(s) = C_w (sI − A_w)^{-1} B_w + D_w`, stable with distinct poles.
#[derive(Clone, Debug)]
pub struct WeightSystem {
    a: RMat,
    b: RMat,
    c: RMat,
    d: RMat,
    /// Poles `γ_k` with residues `e_k f_kᵀ` (empty for a static weight).
    pub pole_residue: Option<PoleResidueForm>,
}

impl WeightSystem {
    pub fn new(a: RMat, b: RMat, c: RMat, d: RMat) -> Result<Self> {
        let nw = a.nrows();
        if a.ncols() != nw || b.nrows() != nw || c.ncols() != nw || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(MorError::DimensionMismatch("weight matrices have inconsistent sizes".into()));
        }
        let pole_residue = if nw == 0 {
            None
        } else {
            let pr = lti::pole_residue_complex(
                &CMat::identity(nw, nw),
                &linalg::to_complex(&a),
                &linalg::to_complex(&b),
                &linalg::to_complex(&c),
                &d,
                false,
            )?;
            if !pr.is_stable() {
                return Err(MorError::UnstableSystem { abscissa: pr.spectral_abscissa() });
            }
            pr.check_distinct()?;
            Some(pr)
        };
        Ok(WeightSystem { a, b, c, d, pole_residue })
    }

    /// Static weight `W(s) = D_w`.
    pub fn constant(d: RMat) -> Self {
        let (m, mw) = d.shape();
        WeightSystem { a: RMat::zeros(0, 0), b: RMat::zeros(0, mw), c: RMat::zeros(m, 0), d, pole_residue: None }
    }

    pub fn identity(m: usize) -> Self {
        Self::constant(RMat::identity(m, m))
    }

    pub fn from_descriptor(sys: &DescriptorSystem) -> Result<Self> {
        let std = sys.to_standard()?;
        let (_, a, b, c, d) = std.into_parts();
        Self::new(a, b, c, d)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Rows of `W` (must equal the input count of the weighted system).
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d.ncols()
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

    pub fn eval(&self, s: C64) -> Result<CMat> {
        let mut w = linalg::to_complex(&self.d);
        if self.order() > 0 {
            let nw = self.order();
            let lu = Lu::new(CMat::identity(nw, nw) * s - linalg::to_complex(&self.a));
            if lu.is_singular() {
                return Err(MorError::SingularPencil(s));
            }
            w += linalg::to_complex(&self.c) * lu.solve(&linalg::to_complex(&self.b));
        }
        Ok(w)
    }

    /// Orthonormal basis of `Ker(D_wᵀ)`.
    pub fn kernel_dt(&self) -> RMat {
        if self.d.ncols() == 0 {
            return RMat::identity(self.d.nrows(), self.d.nrows());
        }
        linalg::null_space(&self.d.transpose(), 1e-12)
    }
}

/// State-space realization `C_F (sI − A_F)^{-1} B_F + D_F` of `𝔉[H]`.
#[derive(Clone, Debug)]
pub struct FMapRealization {
    pub system: DescriptorSystem,
    pub p_w: RMat,
    pub z: RMat,
}

impl FMapRealization {
    /// Impulse response at `0⁺`, `C_F B_F`.
    pub fn impulse_at_zero(&self) -> RMat {
        self.system.c() * self.system.b()
    }

    pub fn lyapunov_residual(&self, w: &WeightSystem) -> f64 {
        let r = w.a() * &self.p_w + &self.p_w * w.a().transpose() + w.b() * w.b().transpose();
        r.norm() / scale(&[w.a().norm() * self.p_w.norm(), w.b().norm().powi(2)])
    }

    pub fn sylvester_residual(&self, a: &RMat, b: &RMat, w: &WeightSystem) -> f64 {
        let rhs = b * (w.c() * &self.p_w + w.d() * w.b().transpose());
        let r = a * &self.z + &self.z * w.a().transpose() + &rhs;
        r.norm() / scale(&[a.norm() * self.z.norm(), w.a().norm() * self.z.norm(), rhs.norm()])
    }
}

fn scale(parts: &[f64]) -> f64 {
    parts.iter().cloned().fold(f64::MIN_POSITIVE, f64::max)
}

impl TransferFunction for FMapRealization {
    fn inputs(&self) -> usize {
        self.system.inputs()
    }
    fn outputs(&self) -> usize {
        self.system.outputs()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        self.system.transfer(s)
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        self.system.transfer_with_derivative(s)
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        self.system.transfer_kth_derivative(s, k)
    }
}

/// `(A, B, C, D)` with `E` folded into `A` and `B`.
fn normalized(sys: &DescriptorSystem) -> Result<(RMat, RMat, RMat, RMat)> {
    let std = sys.to_standard()?;
    let (_, a, b, c, d) = std.into_parts();
    Ok((a, b, c, d))
}

fn check_weight(sys: &DescriptorSystem, w: &WeightSystem) -> Result<()> {
    if w.outputs() != sys.inputs() {
        return Err(MorError::DimensionMismatch(format!(
            "weight has {} outputs but the system has {} inputs",
            w.outputs(),
            sys.inputs()
        )));
    }
    Ok(())
}

/// Realization of `𝔉[H]` from one Lyapunov and one Sylvester solve.
/// A nonzero `D` contributes the constant term `D D_w D_wᵀ`.
pub fn fmap_realization(sys: &DescriptorSystem, w: &WeightSystem) -> Result<FMapRealization> {
    check_weight(sys, w)?;
    let report = sys.is_stable()?;
    if !report.stable {
        return Err(MorError::UnstableSystem { abscissa: report.abscissa });
    }
    let (a, b, c, d) = normalized(sys)?;
    let (n, nw) = (a.nrows(), w.order());
    let m = sys.inputs();
    let (p_w, z) = if nw == 0 {
        (RMat::zeros(0, 0), RMat::zeros(n, 0))
    } else {
        let p_w = linalg::lyapunov(w.a(), &(w.b() * w.b().transpose()))?;
        let rhs = -(&b * (w.c() * &p_w + w.d() * w.b().transpose()));
        let z = linalg::sylvester(&a, &w.a().transpose(), &rhs)?;
        (p_w, z)
    };
    let nf = n + nw;
    let mut af = RMat::zeros(nf, nf);
    af.view_mut((0, 0), (n, n)).copy_from(&a);
    af.view_mut((0, n), (n, nw)).copy_from(&(&b * w.c()));
    af.view_mut((n, n), (nw, nw)).copy_from(w.a());
    let mut bf = RMat::zeros(nf, m);
    bf.rows_mut(0, n).copy_from(&(&z * w.c().transpose() + &b * w.d() * w.d().transpose()));
    if nw > 0 {
        bf.rows_mut(n, nw).copy_from(&(&p_w * w.c().transpose() + w.b() * w.d().transpose()));
    }
    let mut cf = RMat::zeros(c.nrows(), nf);
    cf.columns_mut(0, n).copy_from(&c);
    cf.columns_mut(n, nw).copy_from(&(&d * w.c()));
    let df = &d * w.d() * w.d().transpose();
    let system = DescriptorSystem::from_state_space(af, bf, cf, df)?;
    let out = FMapRealization { system, p_w, z };
    if nw > 0 {
        let tol = 1e-9;
        if out.lyapunov_residual(w) > tol || out.sylvester_residual(&a, &b, w) > tol {
            return Err(MorError::LyapunovFailure("weight equations solved inaccurately".into()));
        }
    }
    Ok(out)
}

/// `𝔉[H](s)` evaluated from its defining formula; used to cross-check the
/// realization and to handle representations without a state space.
pub fn fmap_eval<F: TransferFunction + ?Sized>(h: &F, w: &WeightSystem, s: C64) -> Result<CMat> {
    let mut out = h.eval(s)? * w.eval(s)? * w.eval(-s)?.transpose();
    if let Some(pr) = &w.pole_residue {
        for k in 0..pr.order() {
            let g = pr.poles[k];
            let hk = h.eval(-g)? * w.eval(-g)?;
            out += hk * &pr.right[k] * pr.left[k].transpose() / (s + g);
        }
    }
    Ok(out)
}

/// Series connection `H·W` as a descriptor system.
pub fn weighted_system(sys: &DescriptorSystem, w: &WeightSystem) -> Result<DescriptorSystem> {
    check_weight(sys, w)?;
    let (n, nw) = (sys.order(), w.order());
    let nf = n + nw;
    let mut e = RMat::identity(nf, nf);
    e.view_mut((0, 0), (n, n)).copy_from(sys.e());
    let mut a = RMat::zeros(nf, nf);
    a.view_mut((0, 0), (n, n)).copy_from(sys.a());
    a.view_mut((0, n), (n, nw)).copy_from(&(sys.b() * w.c()));
    a.view_mut((n, n), (nw, nw)).copy_from(w.a());
    let mut b = RMat::zeros(nf, w.inputs());
    b.rows_mut(0, n).copy_from(&(sys.b() * w.d()));
    b.rows_mut(n, nw).copy_from(w.b());
    let mut c = RMat::zeros(sys.outputs(), nf);
    c.columns_mut(0, n).copy_from(sys.c());
    c.columns_mut(n, nw).copy_from(&(sys.d() * w.c()));
    DescriptorSystem::new(e, a, b, c, sys.d() * w.d())
}

/// `‖(H − H_r) W‖_H2`.
pub fn weighted_h2_norm(full: &DescriptorSystem, red: &DescriptorSystem, w: &WeightSystem) -> Result<f64> {
    let err = full.error_system(red)?;
    weighted_system(&err, w)?.h2_norm()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedOptimalityReport {
    /// Interpolation residuals of `𝔉[H]` against `𝔉[H_r]` at `−λ_k`.
    pub interpolation: OptimalityReport,
    /// `‖(F(0) − F_r(0)) n‖ / ‖F(0) n‖` for each basis vector `n` of `Ker(D_wᵀ)`.
    pub kernel: Vec<f64>,
    pub max_residual: f64,
}

pub fn weighted_optimality_residuals(
    full: &DescriptorSystem,
    red: &PoleResidueForm,
    w: &WeightSystem,
) -> Result<WeightedOptimalityReport> {
    red.check_distinct()?;
    let ff = fmap_realization(full, w)?;
    let rf = fmap_realization(&red.to_descriptor()?, w)?;
    let mut entries = Vec::with_capacity(red.order());
    let rel = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    for k in 0..red.order() {
        let s = -red.poles[k];
        let (h, dh) = ff.eval_with_derivative(s)?;
        let (hr, dhr) = rf.eval_with_derivative(s)?;
        let (l, r) = (&red.left[k], &red.right[k]);
        let hf_r = &h * r;
        let right = rel((&hf_r - &hr * r).norm(), hf_r.norm());
        let hf_l = l.transpose() * &h;
        let left = rel((&hf_l - l.transpose() * &hr).norm(), hf_l.norm());
        let hd = (l.transpose() * &dh * r)[(0, 0)];
        let hdr = (l.transpose() * &dhr * r)[(0, 0)];
        let hermite = rel((hd - hdr).norm(), hd.norm());
        entries.push(h2::OptimalityEntry { pole: [red.poles[k].re, red.poles[k].im], right, left, hermite });
    }
    let max_interp = entries.iter().map(|e| e.right.max(e.left).max(e.hermite)).fold(0.0, f64::max);
    let kern = w.kernel_dt();
    let (f0, fr0) = (ff.impulse_at_zero(), rf.impulse_at_zero());
    let kernel: Vec<f64> = kern
        .column_iter()
        .map(|nv| rel((&f0 * nv - &fr0 * nv).norm(), (&f0 * nv).norm()))
        .collect();
    let max_residual = kernel.iter().cloned().fold(max_interp, f64::max);
    Ok(WeightedOptimalityReport {
        interpolation: OptimalityReport { entries, max_residual: max_interp },
        kernel,
        max_residual,
    })
}
