//! Affine-parametric coprime systems
//! `H(s, p) = C(s, p) K(s, p)^{-1} B(s, p) + D` where every operator is a sum
//! of groups `k_i(p) · Σ_j f_j(s) M_ij`.

use serde::{Deserialize, Serialize};

use crate::coprime::{CoprimeSystem, Term};
use crate::error::{MorError, Result};
use crate::interp::{self, ReductionBases, TangentData};
use crate::linalg::{self, as_col, project_matrix, to_complex, Lu};
use crate::{CMat, CVec, RMat, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    /// Exponent per parameter coordinate; missing trailing entries are zero.
    pub powers: Vec<u32>,
}

/// Scalar parameter function multiplying one operator group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientFunction {
    Constant { value: f64 },
    /// `p_index`
    Coordinate { index: usize },
    Polynomial { terms: Vec<Monomial> },
    /// `scale · exp(offset + weightsᵀp)`
    ExpAffine { scale: f64, offset: f64, weights: Vec<f64> },
}

impl CoefficientFunction {
    pub fn one() -> Self {
        CoefficientFunction::Constant { value: 1.0 }
    }

    pub fn validate(&self, nparams: usize) -> Result<()> {
        let bad = |msg: String| Err(MorError::InvalidInput(msg));
        match self {
            CoefficientFunction::Constant { value } if !value.is_finite() => bad("non-finite constant".into()),
            CoefficientFunction::Coordinate { index } if *index >= nparams => {
                bad(format!("coordinate {index} out of range for {nparams} parameters"))
            }
            CoefficientFunction::Polynomial { terms } => {
                for t in terms {
                    if t.powers.len() > nparams || !t.coeff.is_finite() {
                        return bad("polynomial term does not fit the parameter dimension".into());
                    }
                }
                Ok(())
            }
            CoefficientFunction::ExpAffine { scale, offset, weights } => {
                if weights.len() != nparams {
                    return bad(format!("exponential needs {nparams} weights, got {}", weights.len()));
                }
                if !(scale.is_finite() && offset.is_finite() && weights.iter().all(|w| w.is_finite())) {
                    return bad("non-finite exponential coefficient".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            CoefficientFunction::Constant { value } => *value,
            CoefficientFunction::Coordinate { index } => p[*index],
            CoefficientFunction::Polynomial { terms } => terms
                .iter()
                .map(|t| t.coeff * t.powers.iter().zip(p).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
                .sum(),
            CoefficientFunction::ExpAffine { scale, offset, weights } => {
                scale * (offset + weights.iter().zip(p).map(|(w, x)| w * x).sum::<f64>()).exp()
            }
        }
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        match self {
            CoefficientFunction::Constant { .. } => {}
            CoefficientFunction::Coordinate { index } => g[*index] = 1.0,
            CoefficientFunction::Polynomial { terms } => {
                for t in terms {
                    for j in 0..t.powers.len() {
                        if t.powers[j] == 0 {
                            continue;
                        }
                        let mut v = t.coeff * t.powers[j] as f64;
                        for (i, (&k, &x)) in t.powers.iter().zip(p).enumerate() {
                            let e = if i == j { k - 1 } else { k };
                            v *= x.powi(e as i32);
                        }
                        g[j] += v;
                    }
                }
            }
            CoefficientFunction::ExpAffine { weights, .. } => {
                let v = self.eval(p);
                for (gj, w) in g.iter_mut().zip(weights) {
                    *gj = w * v;
                }
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    pub coefficient: CoefficientFunction,
    pub terms: Vec<Term>,
}

impl ParamGroup {
    pub fn new(coefficient: CoefficientFunction, terms: Vec<Term>) -> Self {
        ParamGroup { coefficient, terms }
    }

    pub fn constant(terms: Vec<Term>) -> Self {
        Self::new(CoefficientFunction::one(), terms)
    }
}

fn s_part(terms: &[Term], s: C64, k: usize, shape: (usize, usize)) -> CMat {
    let mut out = CMat::zeros(shape.0, shape.1);
    for t in terms {
        let w = t.f.derivative(s, k);
        if w != C64::new(0.0, 0.0) {
            out += to_complex(&t.matrix) * w;
        }
    }
    out
}

/// `Σ_i k_i(p) Σ_j f_j^{(k)}(s) M_ij`.
fn assemble(groups: &[ParamGroup], s: C64, k: usize, p: &[f64], shape: (usize, usize)) -> CMat {
    let mut out = CMat::zeros(shape.0, shape.1);
    for g in groups {
        let c = g.coefficient.eval(p);
        if c != 0.0 {
            out += s_part(&g.terms, s, k, shape) * C64::new(c, 0.0);
        }
    }
    out
}

/// `∂/∂p_j` of the assembled operator, one matrix per coordinate.
fn assemble_gradient(groups: &[ParamGroup], s: C64, p: &[f64], shape: (usize, usize)) -> Vec<CMat> {
    let mut out = vec![CMat::zeros(shape.0, shape.1); p.len()];
    for g in groups {
        let grad = g.coefficient.gradient(p);
        if grad.iter().all(|&x| x == 0.0) {
            continue;
        }
        let m = s_part(&g.terms, s, 0, shape);
        for (o, &dj) in out.iter_mut().zip(&grad) {
            if dj != 0.0 {
                *o += &m * C64::new(dj, 0.0);
            }
        }
    }
    out
}

fn freeze(groups: &[ParamGroup], p: &[f64]) -> Vec<Term> {
    groups
        .iter()
        .flat_map(|g| {
            let c = g.coefficient.eval(p);
            g.terms.iter().map(move |t| Term::new(t.f, &t.matrix * c))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricCoprimeSystem {
    k: Vec<ParamGroup>,
    b: Vec<ParamGroup>,
    c: Vec<ParamGroup>,
    d: RMat,
    nparams: usize,
    bounds: Option<Vec<(f64, f64)>>,
}

/// Value, `s`-derivative and parameter gradient of `H` at one point.
#[derive(Clone, Debug)]
pub struct ParamEvaluation {
    pub value: CMat,
    pub derivative: CMat,
    pub gradient: Vec<CMat>,
}

impl ParametricCoprimeSystem {
    pub fn new(k: Vec<ParamGroup>, b: Vec<ParamGroup>, c: Vec<ParamGroup>, d: RMat, nparams: usize) -> Result<Self> {
        let (p, m) = d.shape();
        let n = k
            .iter()
            .flat_map(|g| g.terms.first())
            .map(|t| t.matrix.nrows())
            .next()
            .ok_or_else(|| MorError::InvalidInput("K needs at least one term".into()))?;
        let check = |groups: &[ParamGroup], shape: (usize, usize), name: &str| -> Result<()> {
            if groups.iter().all(|g| g.terms.is_empty()) {
                return Err(MorError::InvalidInput(format!("{name} needs at least one term")));
            }
            for g in groups {
                g.coefficient.validate(nparams)?;
                for t in &g.terms {
                    t.f.validate()?;
                    if t.matrix.shape() != shape {
                        return Err(MorError::DimensionMismatch(format!(
                            "{name} terms must be {} x {}",
                            shape.0, shape.1
                        )));
                    }
                    if t.matrix.iter().any(|x| !x.is_finite()) {
                        return Err(MorError::InvalidInput(format!("{name} has non-finite entries")));
                    }
                }
            }
            Ok(())
        };
        check(&k, (n, n), "K")?;
        check(&b, (n, m), "B")?;
        check(&c, (p, n), "C")?;
        if d.iter().any(|x| !x.is_finite()) {
            return Err(MorError::NonFinite("D"));
        }
        Ok(ParametricCoprimeSystem { k, b, c, d, nparams, bounds: None })
    }

    /// Declare the admissible parameter box.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.nparams || bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(MorError::InvalidInput("parameter box must give lo <= hi per coordinate".into()));
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    pub fn order(&self) -> usize {
        self.k.iter().flat_map(|g| g.terms.first()).next().map_or(0, |t| t.matrix.nrows())
    }
    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }
    pub fn nparams(&self) -> usize {
        self.nparams
    }
    pub fn k_groups(&self) -> &[ParamGroup] {
        &self.k
    }
    pub fn b_groups(&self) -> &[ParamGroup] {
        &self.b
    }
    pub fn c_groups(&self) -> &[ParamGroup] {
        &self.c
    }
    pub fn d(&self) -> &RMat {
        &self.d
    }

    pub fn check_parameter(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.nparams {
            return Err(MorError::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.nparams,
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(MorError::NonFinite("parameter"));
        }
        if let Some(b) = &self.bounds {
            for (j, (&x, &(lo, hi))) in p.iter().zip(b).enumerate() {
                if x < lo || x > hi {
                    return Err(MorError::InvalidInput(format!("parameter {j} = {x} outside [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    pub fn k_at(&self, s: C64, p: &[f64]) -> CMat {
        let n = self.order();
        assemble(&self.k, s, 0, p, (n, n))
    }
    pub fn b_at(&self, s: C64, p: &[f64]) -> CMat {
        assemble(&self.b, s, 0, p, (self.order(), self.inputs()))
    }
    pub fn c_at(&self, s: C64, p: &[f64]) -> CMat {
        assemble(&self.c, s, 0, p, (self.outputs(), self.order()))
    }

    /// The coprime system obtained by fixing the parameter.
    pub fn at_parameter(&self, p: &[f64]) -> Result<CoprimeSystem> {
        self.check_parameter(p)?;
        CoprimeSystem::new(freeze(&self.k, p), freeze(&self.b, p), freeze(&self.c, p), self.d.clone())
    }

    fn factor(&self, s: C64, p: &[f64]) -> Result<Lu> {
        let lu = Lu::new(self.k_at(s, p));
        if lu.is_singular() {
            Err(MorError::SingularK(s))
        } else {
            Ok(lu)
        }
    }

    pub fn eval(&self, s: C64, p: &[f64]) -> Result<CMat> {
        self.check_parameter(p)?;
        let lu = self.factor(s, p)?;
        Ok(self.c_at(s, p) * lu.solve(&self.b_at(s, p)) + to_complex(&self.d))
    }
}

/// `H(s,p)`, `∂H/∂s` and `∇_p H` with product-rule terms for parametric `B`, `C`.
pub fn param_eval(sys: &ParametricCoprimeSystem, s: C64, p: &[f64]) -> Result<ParamEvaluation> {
    sys.check_parameter(p)?;
    let (n, m, q) = (sys.order(), sys.inputs(), sys.outputs());
    let lu = sys.factor(s, p)?;
    let (b, c) = (sys.b_at(s, p), sys.c_at(s, p));
    let x = lu.solve(&b);
    let y = lu.solve_transpose(&c.transpose());
    let value = &c * &x + to_complex(&sys.d);
    let kd = assemble(&sys.k, s, 1, p, (n, n));
    let bd = assemble(&sys.b, s, 1, p, (n, m));
    let cd = assemble(&sys.c, s, 1, p, (q, n));
    let derivative = &cd * &x - y.transpose() * &kd * &x + y.transpose() * &bd;
    let kg = assemble_gradient(&sys.k, s, p, (n, n));
    let bg = assemble_gradient(&sys.b, s, p, (n, m));
    let cg = assemble_gradient(&sys.c, s, p, (q, n));
    let gradient = (0..p.len())
        .map(|j| &cg[j] * &x - y.transpose() * &kg[j] * &x + y.transpose() * &bg[j])
        .collect();
    Ok(ParamEvaluation { value, derivative, gradient })
}

/// Project every coefficient matrix once; coefficient functions are kept.
pub fn param_reduce(sys: &ParametricCoprimeSystem, v: &RMat, w: &RMat) -> Result<ParametricCoprimeSystem> {
    let n = sys.order();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(MorError::DimensionMismatch(format!("bases must both be {n} x r")));
    }
    let map = |groups: &[ParamGroup], f: &dyn Fn(&RMat) -> RMat| -> Vec<ParamGroup> {
        groups
            .iter()
            .map(|g| {
                ParamGroup::new(g.coefficient.clone(), g.terms.iter().map(|t| Term::new(t.f, f(&t.matrix))).collect())
            })
            .collect()
    };
    let red = ParametricCoprimeSystem {
        k: map(&sys.k, &|m| project_matrix(w, m, v)),
        b: map(&sys.b, &|m| w.transpose() * m),
        c: map(&sys.c, &|m| m * v),
        d: sys.d.clone(),
        nparams: sys.nparams,
        bounds: sys.bounds.clone(),
    };
    let p0: Vec<f64> = match &sys.bounds {
        Some(b) => b.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        None => vec![0.0; sys.nparams],
    };
    let s0 = C64::new(0.618, 0.755);
    let kr = red.k_at(s0, &p0);
    let sv = linalg::singular_values_c(&kr);
    if sv.last().copied().unwrap_or(0.0) <= 1e-13 * sv.first().copied().unwrap_or(0.0) {
        return Err(MorError::SingularReducedK(s0));
    }
    Ok(red)
}

/// Tangential data attached to one parameter point.
#[derive(Clone, Debug)]
pub struct ParamPoint {
    pub parameter: Vec<f64>,
    pub tangent: TangentData,
}

#[derive(Clone, Debug, Default)]
pub struct ParamTangentData {
    pub points: Vec<ParamPoint>,
}

impl ParamTangentData {
    pub fn new(points: Vec<ParamPoint>) -> Self {
        ParamTangentData { points }
    }

    /// One bitangential condition at `(σ, π)`.
    pub fn single(sigma: C64, parameter: Vec<f64>, r: CVec, l: CVec) -> Result<Self> {
        let tangent = TangentData::bitangential(vec![sigma], vec![r], vec![l])?;
        Ok(ParamTangentData { points: vec![ParamPoint { parameter, tangent }] })
    }
}

/// Stack `K(σ_i, π_j)^{-1}B(σ_i, π_j) r_ij` (and the left analogues) over all
/// parameter points, then realify and truncate to numerical rank.
pub fn multipoint_bases(sys: &ParametricCoprimeSystem, data: &ParamTangentData) -> Result<ReductionBases> {
    if data.points.is_empty() {
        return Err(MorError::InvalidInput("no parameter points given".into()));
    }
    let n = sys.order();
    let (mut vcols, mut wcols) = (Vec::new(), Vec::new());
    for pt in &data.points {
        let frozen = sys.at_parameter(&pt.parameter)?;
        let vc = crate::coprime::coprime_right_chains(&frozen, &pt.tangent)?;
        let wc = crate::coprime::coprime_left_chains(&frozen, &pt.tangent)?;
        vcols.extend(closed_columns(&vc));
        wcols.extend(closed_columns(&wc));
    }
    let v = interp::realify_and_orthogonalize(&interp::stack_columns(n, &vcols))?;
    let w = interp::realify_and_orthogonalize(&interp::stack_columns(n, &wcols))?;
    if v.ncols() != w.ncols() {
        return Err(MorError::InvalidInput(format!(
            "right and left bases have different ranks ({} vs {})",
            v.ncols(),
            w.ncols()
        )));
    }
    Ok(ReductionBases { v, w })
}

/// Columns plus the conjugates of any complex column.
fn closed_columns(m: &CMat) -> Vec<CVec> {
    let mut out = Vec::with_capacity(2 * m.ncols());
    for c in m.column_iter() {
        out.push(c.into_owned());
        if c.iter().any(|z| z.im != 0.0) {
            out.push(c.map(|z| z.conj()));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SensitivityReport {
    pub right: f64,
    pub left: f64,
    pub hermite: f64,
    pub gradient: f64,
    pub max_residual: f64,
    /// `∇_p ℓᵀH(σ,π)r` of the full model, as `[re, im]` pairs.
    pub full_gradient: Vec<[f64; 2]>,
}

/// Normalized residuals of the right, left, Hermite and parameter-gradient
/// conditions at `(σ, π)` along `(r, ℓ)`.
pub fn sensitivity_residual(
    full: &ParametricCoprimeSystem,
    red: &ParametricCoprimeSystem,
    sigma: C64,
    param: &[f64],
    r: &CVec,
    l: &CVec,
) -> Result<SensitivityReport> {
    let f = param_eval(full, sigma, param)?;
    let g = param_eval(red, sigma, param)?;
    let (rc, lc) = (as_col(r), as_col(l));
    let rel = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    let hr = &f.value * &rc;
    let right = rel((&hr - &g.value * &rc).norm(), hr.norm());
    let lh = lc.transpose() * &f.value;
    let left = rel((&lh - lc.transpose() * &g.value).norm(), lh.norm());
    let bi = |m: &CMat| (lc.transpose() * m * &rc)[(0, 0)];
    let hd = bi(&f.derivative);
    let hermite = rel((hd - bi(&g.derivative)).norm(), hd.norm());
    let gf: Vec<C64> = f.gradient.iter().map(bi).collect();
    let gr: Vec<C64> = g.gradient.iter().map(bi).collect();
    let gnorm = gf.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let gdiff = gf.iter().zip(&gr).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let gradient = rel(gdiff, gnorm);
    Ok(SensitivityReport {
        right,
        left,
        hermite,
        gradient,
        max_residual: right.max(left).max(hermite).max(gradient),
        full_gradient: gf.iter().map(|z| [z.re, z.im]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn one() -> CVec {
        CVec::from_element(1, C64::new(1.0, 0.0))
    }

    #[test]
    fn mass_spring_values() {
        let sys = models::mass_spring();
        let p = [0.2, 0.3];
        let ev = param_eval(&sys, C64::new(1.0, 0.0), &p).unwrap();
        assert!((ev.value[(0, 0)].re - 0.17885).abs() < 1e-5);
        assert!((ev.derivative[(0, 0)].re + 0.24814).abs() < 1e-5);
        assert!((ev.gradient[0][(0, 0)].re + 0.045894).abs() < 1e-6);
        assert!((ev.gradient[1][(0, 0)].re - 0.019349).abs() < 1e-6);
    }

    #[test]
    fn single_point_reduction_matches_sensitivity() {
        let sys = models::mass_spring();
        let p = vec![0.2, 0.3];
        let data = ParamTangentData::single(C64::new(1.0, 0.0), p.clone(), one(), one()).unwrap();
        let bases = multipoint_bases(&sys, &data).unwrap();
        let red = param_reduce(&sys, &bases.v, &bases.w).unwrap();
        assert_eq!(red.order(), 1);
        assert_eq!(red.k_groups().len(), sys.k_groups().len());
        let rep = sensitivity_residual(&sys, &red, C64::new(1.0, 0.0), &p, &one(), &one()).unwrap();
        assert!(rep.max_residual < 1e-9, "{rep:?}");
    }

    #[test]
    fn identity_bases_reproduce() {
        let sys = models::random_parametric(2, 6, 2, 1, 1);
        let id = RMat::identity(6, 6);
        let red = param_reduce(&sys, &id, &id).unwrap();
        let p = [0.1, -0.2];
        let s = C64::new(0.3, 1.2);
        assert!((sys.eval(s, &p).unwrap() - red.eval(s, &p).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn coefficient_gradients() {
        let f = CoefficientFunction::Polynomial {
            terms: vec![
                Monomial { coeff: 2.0, powers: vec![2, 1] },
                Monomial { coeff: -1.0, powers: vec![0, 3] },
            ],
        };
        let p = [0.7, -0.4];
        let g = f.gradient(&p);
        assert!((g[0] - 2.0 * 2.0 * 0.7 * -0.4).abs() < 1e-14);
        assert!((g[1] - (2.0 * 0.49 - 3.0 * 0.16)).abs() < 1e-14);
        let e = CoefficientFunction::ExpAffine { scale: 2.0, offset: 0.1, weights: vec![1.0, -2.0] };
        let h = 1e-6;
        let fd = (e.eval(&[0.7 + h, -0.4]) - e.eval(&[0.7 - h, -0.4])) / (2.0 * h);
        assert!((e.gradient(&p)[0] - fd).abs() < 1e-8);
    }

    #[test]
    fn duplicate_points_are_truncated() {
        let sys = models::mass_spring();
        let pt = ParamPoint {
            parameter: vec![0.2, 0.3],
            tangent: TangentData::bitangential(vec![C64::new(1.0, 0.0)], vec![one()], vec![one()]).unwrap(),
        };
        let data = ParamTangentData::new(vec![pt.clone(), pt]);
        assert_eq!(multipoint_bases(&sys, &data).unwrap().v.ncols(), 1);
    }
}
