//! Tangential interpolation data, Krylov-type bases and Petrov-Galerkin
//! projection.

use serde::Serialize;

use crate::error::{MorError, Result};
use crate::linalg::{self, project_matrix, to_complex, Lu, Pairing};
use crate::lti::{DescriptorSystem, TransferFunction};
use crate::{CMat, CVec, RMat, C64};

/// Right points `σ_i` with directions `r_i`, left points `μ_j` with
/// directions `ℓ_j`, and the Hermite order of each point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentData {
    pub right_points: Vec<C64>,
    pub right_dirs: Vec<CVec>,
    pub right_orders: Vec<usize>,
    pub left_points: Vec<C64>,
    pub left_dirs: Vec<CVec>,
    pub left_orders: Vec<usize>,
}

impl TangentData {
    pub fn new(
        right_points: Vec<C64>,
        right_dirs: Vec<CVec>,
        left_points: Vec<C64>,
        left_dirs: Vec<CVec>,
    ) -> Result<Self> {
        let (nr, nl) = (right_points.len(), left_points.len());
        Self::with_orders(right_points, right_dirs, vec![1; nr], left_points, left_dirs, vec![1; nl])
    }

    pub fn with_orders(
        right_points: Vec<C64>,
        right_dirs: Vec<CVec>,
        right_orders: Vec<usize>,
        left_points: Vec<C64>,
        left_dirs: Vec<CVec>,
        left_orders: Vec<usize>,
    ) -> Result<Self> {
        if right_dirs.len() != right_points.len() || right_orders.len() != right_points.len() {
            return Err(MorError::DimensionMismatch("right points/directions/orders".into()));
        }
        if left_dirs.len() != left_points.len() || left_orders.len() != left_points.len() {
            return Err(MorError::DimensionMismatch("left points/directions/orders".into()));
        }
        if right_orders.iter().chain(&left_orders).any(|&k| k == 0) {
            return Err(MorError::InvalidInput("interpolation orders must be positive".into()));
        }
        let all_dirs = right_dirs.iter().chain(&left_dirs);
        for d in all_dirs {
            if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(MorError::NonFinite("tangent direction"));
            }
            if d.norm() == 0.0 {
                return Err(MorError::InvalidInput("tangent directions must be nonzero".into()));
            }
        }
        if right_points.iter().chain(&left_points).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MorError::NonFinite("interpolation point"));
        }
        Ok(TangentData { right_points, right_dirs, right_orders, left_points, left_dirs, left_orders })
    }

    /// `σ_i = μ_i` with one right and one left direction per point.
    pub fn bitangential(points: Vec<C64>, right_dirs: Vec<CVec>, left_dirs: Vec<CVec>) -> Result<Self> {
        Self::new(points.clone(), right_dirs, points, left_dirs)
    }

    /// All unit directions at every point: matches the full matrix `H(σ)`.
    pub fn full_matrix(points: &[C64], m: usize, p: usize) -> Result<Self> {
        let unit = |k: usize, n: usize| CVec::from_fn(n, |i, _| C64::new((i == k) as u8 as f64, 0.0));
        let mut rp = Vec::new();
        let mut rd = Vec::new();
        let mut lp = Vec::new();
        let mut ld = Vec::new();
        for &s in points {
            for j in 0..m {
                rp.push(s);
                rd.push(unit(j, m));
            }
            for i in 0..p {
                lp.push(s);
                ld.push(unit(i, p));
            }
        }
        Self::new(rp, rd, lp, ld)
    }

    pub fn check_dims(&self, m: usize, p: usize) -> Result<()> {
        if self.right_dirs.iter().any(|r| r.len() != m) {
            return Err(MorError::DimensionMismatch(format!("right directions must have length {m}")));
        }
        if self.left_dirs.iter().any(|l| l.len() != p) {
            return Err(MorError::DimensionMismatch(format!("left directions must have length {p}")));
        }
        Ok(())
    }

    pub fn right_count(&self) -> usize {
        self.right_orders.iter().sum()
    }

    pub fn left_count(&self) -> usize {
        self.left_orders.iter().sum()
    }

    /// Whether `{(σ_i, r_i)}` and `{(μ_j, ℓ_j)}` are closed under conjugation.
    pub fn is_conjugate_closed(&self) -> bool {
        closed(&self.right_points, &self.right_dirs, &self.right_orders)
            && closed(&self.left_points, &self.left_dirs, &self.left_orders)
    }
}

fn closed(points: &[C64], dirs: &[CVec], orders: &[usize]) -> bool {
    let cols: Vec<CVec> = points
        .iter()
        .zip(dirs)
        .zip(orders)
        .map(|((s, d), &k)| {
            let mut v = d.clone().insert_row(0, *s);
            v = v.insert_row(0, C64::new(k as f64, 0.0));
            v
        })
        .collect();
    if cols.is_empty() {
        return true;
    }
    conjugate_column_pairing(&CMat::from_columns(&cols), 1e-12).is_ok()
}

/// Bases `V`, `W` with equal column counts.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionBases {
    pub v: RMat,
    pub w: RMat,
}

/// How complex chain vectors are turned into real bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisMode {
    /// Each conjugate column pair is replaced by its real and imaginary
    /// parts; no scaling or truncation.
    Raw,
    /// Stack real and imaginary parts and keep an orthonormal basis of the
    /// numerical range (singular values below `1e-12·σ_max` dropped).
    Orthonormal,
}

/// Relative singular-value cutoff for rank truncation.
pub const RANK_TOL: f64 = 1e-12;

struct ShiftCache {
    entries: Vec<(C64, Lu)>,
}

impl ShiftCache {
    fn new() -> Self {
        ShiftCache { entries: Vec::new() }
    }

    fn get(&mut self, sys: &DescriptorSystem, s: C64) -> Result<&Lu> {
        if let Some(i) = self.entries.iter().position(|(p, _)| *p == s) {
            return Ok(&self.entries[i].1);
        }
        let lu = sys.resolvent(s).map_err(|_| MorError::SingularShift(s))?;
        self.entries.push((s, lu));
        Ok(&self.entries.last().unwrap().1)
    }
}

/// Columns `[(σE − A)^{-1}E]^{j-1}(σE − A)^{-1}B r` for `j = 1..N` per point.
pub fn right_chains(sys: &DescriptorSystem, data: &TangentData) -> Result<CMat> {
    data.check_dims(sys.inputs(), sys.outputs())?;
    let e = to_complex(sys.e());
    let b = to_complex(sys.b());
    let mut cache = ShiftCache::new();
    let mut cols = Vec::with_capacity(data.right_count());
    for ((&s, r), &order) in data.right_points.iter().zip(&data.right_dirs).zip(&data.right_orders) {
        let lu = cache.get(sys, s)?;
        let mut x = lu.solve(&linalg::as_col(&(&b * r)));
        cols.push(x.column(0).into_owned());
        for _ in 1..order {
            x = lu.solve(&(&e * &x));
            cols.push(x.column(0).into_owned());
        }
    }
    Ok(stack_columns(sys.order(), &cols))
}

/// Columns `[(μE − A)^{-T}Eᵀ]^{j-1}(μE − A)^{-T}Cᵀℓ` for `j = 1..M` per point.
pub fn left_chains(sys: &DescriptorSystem, data: &TangentData) -> Result<CMat> {
    data.check_dims(sys.inputs(), sys.outputs())?;
    let et = to_complex(&sys.e().transpose());
    let ct = to_complex(&sys.c().transpose());
    let mut cache = ShiftCache::new();
    let mut cols = Vec::with_capacity(data.left_count());
    for ((&s, l), &order) in data.left_points.iter().zip(&data.left_dirs).zip(&data.left_orders) {
        let lu = cache.get(sys, s)?;
        let mut y = lu.solve_transpose(&linalg::as_col(&(&ct * l)));
        cols.push(y.column(0).into_owned());
        for _ in 1..order {
            y = lu.solve_transpose(&(&et * &y));
            cols.push(y.column(0).into_owned());
        }
    }
    Ok(stack_columns(sys.order(), &cols))
}

pub(crate) fn stack_columns(n: usize, cols: &[CVec]) -> CMat {
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(cols)
    }
}

/// Real orthonormal basis of `span{Re v, Im v}` over the columns `v`.
pub fn realify_and_orthogonalize(vc: &CMat) -> Result<RMat> {
    let n = vc.nrows();
    let k = vc.ncols();
    let mut stacked = RMat::zeros(n, 2 * k);
    let mut used = 0;
    for j in 0..k {
        let c = vc.column(j);
        stacked.set_column(used, &c.map(|z| z.re));
        used += 1;
        if c.iter().any(|z| z.im != 0.0) {
            stacked.set_column(used, &c.map(|z| z.im));
            used += 1;
        }
    }
    let q = linalg::orthonormal_span(&stacked.columns(0, used).into_owned(), RANK_TOL);
    if q.ncols() == 0 {
        Err(MorError::RankCollapse)
    } else {
        Ok(q)
    }
}

/// Pair columns that are (numerical) conjugates of each other. Real columns
/// pair with themselves.
pub fn conjugate_column_pairing(cols: &CMat, tol: f64) -> Result<Vec<Pairing>> {
    let k = cols.ncols();
    let mut used = vec![false; k];
    let mut out = Vec::new();
    for i in 0..k {
        if used[i] {
            continue;
        }
        let c = cols.column(i);
        let nrm = c.norm();
        let imag = c.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        if imag <= tol * nrm.max(f64::MIN_POSITIVE) {
            used[i] = true;
            out.push(Pairing::Real(i));
            continue;
        }
        let conj = c.map(|z| z.conj());
        let mut best: Option<(usize, f64)> = None;
        for j in (i + 1)..k {
            if used[j] {
                continue;
            }
            let d = (cols.column(j) - &conj).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= 1e3 * tol * nrm.max(f64::MIN_POSITIVE) => {
                used[i] = true;
                used[j] = true;
                // the first member of a pair provides (Re, Im)
                out.push(Pairing::Pair(i, j));
            }
            _ => return Err(MorError::NotConjugateClosed),
        }
    }
    Ok(out)
}

/// Real matrix with the same column count and (real) span as a conjugate
/// closed complex matrix: each pair `(v, v̄)` becomes `(Re v, Im v)`.
pub fn realify_keep_dim(vc: &CMat) -> Result<RMat> {
    let pairing = conjugate_column_pairing(vc, 1e-12)?;
    Ok(apply_pairing(vc, &pairing))
}

pub(crate) fn apply_pairing(vc: &CMat, pairing: &[Pairing]) -> RMat {
    let mut out = RMat::zeros(vc.nrows(), vc.ncols());
    for p in pairing {
        match *p {
            Pairing::Real(i) => out.set_column(i, &vc.column(i).map(|z| z.re)),
            Pairing::Pair(i, j) => {
                out.set_column(i, &vc.column(i).map(|z| z.re));
                out.set_column(j, &vc.column(i).map(|z| z.im));
            }
        }
    }
    out
}

/// Right and left interpolation bases for `data`.
pub fn interpolation_bases(sys: &DescriptorSystem, data: &TangentData, mode: BasisMode) -> Result<ReductionBases> {
    let vc = right_chains(sys, data)?;
    let wc = left_chains(sys, data)?;
    let (v, w) = match mode {
        BasisMode::Raw => (realify_keep_dim(&vc)?, realify_keep_dim(&wc)?),
        BasisMode::Orthonormal => (realify_and_orthogonalize(&vc)?, realify_and_orthogonalize(&wc)?),
    };
    if v.ncols() != w.ncols() {
        return Err(MorError::InvalidInput(format!(
            "right and left bases have different dimensions ({} vs {})",
            v.ncols(),
            w.ncols()
        )));
    }
    Ok(ReductionBases { v, w })
}

/// `E_r = WᵀEV, A_r = WᵀAV, B_r = WᵀB, C_r = CV, D_r = D`.
pub fn petrov_galerkin_reduce(sys: &DescriptorSystem, v: &RMat, w: &RMat) -> Result<DescriptorSystem> {
    let red = project_unchecked(sys, v, w)?;
    if red.order() == 0 {
        return Err(MorError::RankCollapse);
    }
    if linalg::inverse_condition(red.e()) <= 1e-13 {
        return Err(MorError::SingularReducedPencil);
    }
    Ok(red)
}

pub(crate) fn project_unchecked(sys: &DescriptorSystem, v: &RMat, w: &RMat) -> Result<DescriptorSystem> {
    let n = sys.order();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(MorError::DimensionMismatch(format!(
            "bases must both be {n} x r (got {}x{} and {}x{})",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    DescriptorSystem::new(
        project_matrix(w, sys.e(), v),
        project_matrix(w, sys.a(), v),
        w.transpose() * sys.b(),
        sys.c() * v,
        sys.d().clone(),
    )
}

/// One-shot interpolatory reduction.
pub fn interpolatory_reduce(sys: &DescriptorSystem, data: &TangentData, mode: BasisMode) -> Result<DescriptorSystem> {
    let bases = interpolation_bases(sys, data, mode)?;
    petrov_galerkin_reduce(sys, &bases.v, &bases.w)
}

/// Tangential interpolant with a prescribed feedthrough `D_r`.
///
/// Needs `r` right and `r` left Lagrange conditions. When the full model has
/// `D ≠ 0` the construction is applied to `H − D` with feedthrough `D_r − D`.
pub fn reduce_with_feedthrough(sys: &DescriptorSystem, data: &TangentData, d_r: &RMat) -> Result<DescriptorSystem> {
    let (m, p) = (sys.inputs(), sys.outputs());
    if d_r.shape() != (p, m) {
        return Err(MorError::DimensionMismatch("D_r must be p x m".into()));
    }
    if data.right_orders.iter().chain(&data.left_orders).any(|&k| k != 1) {
        return Err(MorError::InvalidInput("prescribed feedthrough requires Lagrange data".into()));
    }
    let r = data.right_points.len();
    if data.left_points.len() != r {
        return Err(MorError::InvalidInput("need as many left as right conditions".into()));
    }
    let vc = right_chains(sys, data)?;
    let wc = left_chains(sys, data)?;
    let rt = stack_columns(m, &data.right_dirs);
    let lt = stack_columns(p, &data.left_dirs);

    let pr = conjugate_column_pairing(&vstack(&rt, &vc), 1e-12)?;
    let pl = conjugate_column_pairing(&vstack(&lt, &wc), 1e-12)?;
    let v = apply_pairing(&vc, &pr);
    let rr = apply_pairing(&rt, &pr);
    let w = apply_pairing(&wc, &pl);
    let ll = apply_pairing(&lt, &pl);

    let dt = d_r - sys.d();
    let e_r = project_matrix(&w, sys.e(), &v);
    if linalg::inverse_condition(&e_r) <= 1e-13 {
        return Err(MorError::SingularReducedPencil);
    }
    let a_r = project_matrix(&w, sys.a(), &v) + ll.transpose() * &dt * &rr;
    let b_r = w.transpose() * sys.b() - ll.transpose() * &dt;
    let c_r = sys.c() * &v - &dt * &rr;
    DescriptorSystem::new(e_r, a_r, b_r, c_r, d_r.clone())
}

pub(crate) fn vstack(top: &CMat, bottom: &CMat) -> CMat {
    let mut out = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Right,
    Left,
    Hermite,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionResidual {
    pub kind: ConditionKind,
    pub point: [f64; 2],
    /// Derivative order of the matched quantity.
    pub derivative: usize,
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationReport {
    pub conditions: Vec<ConditionResidual>,
    pub max_relative: f64,
}

impl InterpolationReport {
    pub fn all_below(&self, tol: f64) -> bool {
        self.max_relative < tol
    }

    pub fn of_kind(&self, kind: ConditionKind) -> impl Iterator<Item = &ConditionResidual> {
        self.conditions.iter().filter(move |c| c.kind == kind)
    }
}

fn residual(kind: ConditionKind, s: C64, k: usize, full: &[C64], red: &[C64]) -> ConditionResidual {
    let absolute = full.iter().zip(red).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale = full.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let relative = if scale > 0.0 { absolute / scale } else { absolute };
    ConditionResidual { kind, point: [s.re, s.im], derivative: k, absolute, relative }
}

fn same_point(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-14 * a.norm().max(1.0)
}

/// Residuals of every condition implied by `data`: `H^{(k)}(σ)r` for
/// `k < N`, `ℓᵀH^{(k)}(μ)` for `k < M`, and `ℓᵀH^{(k)}(σ)r` for
/// `k < N + M` wherever a right and a left point coincide.
pub fn verify_interpolation<F, R>(full: &F, red: &R, data: &TangentData) -> Result<InterpolationReport>
where
    F: TransferFunction + ?Sized,
    R: TransferFunction + ?Sized,
{
    data.check_dims(full.inputs(), full.outputs())?;
    let mut out = Vec::new();
    for ((&s, r), &n) in data.right_points.iter().zip(&data.right_dirs).zip(&data.right_orders) {
        for k in 0..n {
            let hf = full.eval_derivative(s, k)? * r;
            let hr = red.eval_derivative(s, k)? * r;
            out.push(residual(ConditionKind::Right, s, k, hf.as_slice(), hr.as_slice()));
        }
    }
    for ((&s, l), &mo) in data.left_points.iter().zip(&data.left_dirs).zip(&data.left_orders) {
        for k in 0..mo {
            let hf = l.transpose() * full.eval_derivative(s, k)?;
            let hr = l.transpose() * red.eval_derivative(s, k)?;
            out.push(residual(ConditionKind::Left, s, k, hf.as_slice(), hr.as_slice()));
        }
    }
    for ((&s, r), &n) in data.right_points.iter().zip(&data.right_dirs).zip(&data.right_orders) {
        for ((&mu, l), &mo) in data.left_points.iter().zip(&data.left_dirs).zip(&data.left_orders) {
            if !same_point(s, mu) {
                continue;
            }
            for k in 1..(n + mo) {
                let hf = l.transpose() * full.eval_derivative(s, k)? * r;
                let hr = l.transpose() * red.eval_derivative(s, k)? * r;
                out.push(residual(ConditionKind::Hermite, s, k, hf.as_slice(), hr.as_slice()));
            }
        }
    }
    let max_relative = out.iter().map(|c| c.relative).fold(0.0, f64::max);
    Ok(InterpolationReport { conditions: out, max_relative })
}

/// Tangent data of the three-state example: `σ = μ = 0`, `r = [1; 2]`, `ℓ = [3; 1]`.
pub fn three_state_tangent() -> TangentData {
    let c = |x: f64| C64::new(x, 0.0);
    TangentData::bitangential(
        vec![c(0.0)],
        vec![CVec::from_vec(vec![c(1.0), c(2.0)])],
        vec![CVec::from_vec(vec![c(3.0), c(1.0)])],
    )
    .expect("valid example data")
}
