//! Generalized coprime systems `H(s) = C(s) K(s)^{-1} B(s) + D` whose
//! operators are sums `Σ f_j(s) M_j` of constant matrices weighted by powers
//! of `s` or delay factors `e^{−τs}`.

use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};
use crate::interp::{self, BasisMode, ReductionBases, TangentData};
use crate::linalg::{self, as_col, project_matrix, to_complex, Lu};
use crate::lti::{DescriptorSystem, TransferFunction};
use crate::{CMat, RMat, C64};

/// Scalar weight of one operator term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "lowercase")]
pub enum ScalarSFunction {
    /// `s^k`
    Power(u32),
    /// `e^{−τs}`
    Delay(f64),
}

impl ScalarSFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarSFunction::Delay(t) if !(t.is_finite() && t >= 0.0) => {
                Err(MorError::InvalidInput(format!("delay must be finite and nonnegative, got {t}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: C64) -> C64 {
        self.derivative(s, 0)
    }

    /// `k`-th derivative in `s`.
    pub fn derivative(&self, s: C64, k: usize) -> C64 {
        match *self {
            ScalarSFunction::Power(n) => {
                let n = n as usize;
                if k > n {
                    return C64::new(0.0, 0.0);
                }
                let falling: f64 = ((n - k + 1)..=n).map(|x| x as f64).product();
                s.powu((n - k) as u32) * falling
            }
            ScalarSFunction::Delay(tau) => (-s * tau).exp() * (-tau).powi(k as i32),
        }
    }
}

/// `f(s) · M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub f: ScalarSFunction,
    pub matrix: RMat,
}

impl Term {
    pub fn new(f: ScalarSFunction, matrix: RMat) -> Self {
        Term { f, matrix }
    }
}

fn assemble(terms: &[Term], s: C64, k: usize, rows: usize, cols: usize) -> CMat {
    let mut out = CMat::zeros(rows, cols);
    for t in terms {
        let w = t.f.derivative(s, k);
        if w != C64::new(0.0, 0.0) {
            out += to_complex(&t.matrix) * w;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoprimeSystem {
    k: Vec<Term>,
    b: Vec<Term>,
    c: Vec<Term>,
    d: RMat,
}

impl CoprimeSystem {
    pub fn new(k: Vec<Term>, b: Vec<Term>, c: Vec<Term>, d: RMat) -> Result<Self> {
        if k.is_empty() || b.is_empty() || c.is_empty() {
            return Err(MorError::InvalidInput("K, B and C need at least one term each".into()));
        }
        let n = k[0].matrix.nrows();
        let m = b[0].matrix.ncols();
        let p = c[0].matrix.nrows();
        for t in &k {
            if t.matrix.shape() != (n, n) {
                return Err(MorError::DimensionMismatch("K terms must be n x n".into()));
            }
        }
        for t in &b {
            if t.matrix.shape() != (n, m) {
                return Err(MorError::DimensionMismatch("B terms must be n x m".into()));
            }
        }
        for t in &c {
            if t.matrix.shape() != (p, n) {
                return Err(MorError::DimensionMismatch("C terms must be p x n".into()));
            }
        }
        if d.shape() != (p, m) {
            return Err(MorError::DimensionMismatch("D must be p x m".into()));
        }
        for (t, name) in k.iter().map(|t| (t, "K")).chain(b.iter().map(|t| (t, "B"))).chain(c.iter().map(|t| (t, "C"))) {
            t.f.validate()?;
            if t.matrix.iter().any(|x| !x.is_finite()) {
                return Err(MorError::NonFinite(name));
            }
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(MorError::NonFinite("D"));
        }
        Ok(CoprimeSystem { k, b, c, d })
    }

    /// `K(s) = sE − A`, constant `B`, `C`.
    pub fn from_descriptor(sys: &DescriptorSystem) -> Self {
        CoprimeSystem {
            k: vec![
                Term::new(ScalarSFunction::Power(1), sys.e().clone()),
                Term::new(ScalarSFunction::Power(0), -sys.a()),
            ],
            b: vec![Term::new(ScalarSFunction::Power(0), sys.b().clone())],
            c: vec![Term::new(ScalarSFunction::Power(0), sys.c().clone())],
            d: sys.d().clone(),
        }
    }

    /// `K(s) = sE − A0 − e^{−τs}A1`.
    pub fn delay(e: RMat, a0: RMat, a1: RMat, tau: f64, b: RMat, c: RMat) -> Result<Self> {
        let d = RMat::zeros(c.nrows(), b.ncols());
        Self::new(
            vec![
                Term::new(ScalarSFunction::Power(1), e),
                Term::new(ScalarSFunction::Power(0), -a0),
                Term::new(ScalarSFunction::Delay(tau), -a1),
            ],
            vec![Term::new(ScalarSFunction::Power(0), b)],
            vec![Term::new(ScalarSFunction::Power(0), c)],
            d,
        )
    }

    pub fn order(&self) -> usize {
        self.k[0].matrix.nrows()
    }
    pub fn k_terms(&self) -> &[Term] {
        &self.k
    }
    pub fn b_terms(&self) -> &[Term] {
        &self.b
    }
    pub fn c_terms(&self) -> &[Term] {
        &self.c
    }
    pub fn d(&self) -> &RMat {
        &self.d
    }

    /// `K^{(k)}(s)`.
    pub fn k_at(&self, s: C64, k: usize) -> CMat {
        let n = self.order();
        assemble(&self.k, s, k, n, n)
    }
    pub fn b_at(&self, s: C64, k: usize) -> CMat {
        assemble(&self.b, s, k, self.order(), self.d.ncols())
    }
    pub fn c_at(&self, s: C64, k: usize) -> CMat {
        assemble(&self.c, s, k, self.d.nrows(), self.order())
    }

    pub fn factor(&self, s: C64) -> Result<Lu> {
        let lu = Lu::new(self.k_at(s, 0));
        if lu.is_singular() {
            Err(MorError::SingularK(s))
        } else {
            Ok(lu)
        }
    }

    /// `X^{(j)}` for `j = 0..=k` where `X = K^{-1}B(s)·rhs`, via
    /// `X^{(j)} = K^{-1}(B^{(j)} − Σ_{i≥1} C(j,i) K^{(i)} X^{(j−i)})`.
    fn solve_chain(&self, lu: &Lu, s: C64, k: usize, rhs: &CMat) -> Vec<CMat> {
        let mut xs: Vec<CMat> = Vec::with_capacity(k + 1);
        let kd: Vec<CMat> = (1..=k).map(|i| self.k_at(s, i)).collect();
        for j in 0..=k {
            let mut r = self.b_at(s, j) * rhs;
            for i in 1..=j {
                r -= &kd[i - 1] * &xs[j - i] * C64::new(binom(j, i), 0.0);
            }
            xs.push(lu.solve(&r));
        }
        xs
    }

    /// Left analogue: `Y = K^{-T}C(s)ᵀ·rhs` and its derivatives.
    fn solve_chain_transpose(&self, lu: &Lu, s: C64, k: usize, rhs: &CMat) -> Vec<CMat> {
        let mut ys: Vec<CMat> = Vec::with_capacity(k + 1);
        let kd: Vec<CMat> = (1..=k).map(|i| self.k_at(s, i).transpose()).collect();
        for j in 0..=k {
            let mut r = self.c_at(s, j).transpose() * rhs;
            for i in 1..=j {
                r -= &kd[i - 1] * &ys[j - i] * C64::new(binom(j, i), 0.0);
            }
            ys.push(lu.solve_transpose(&r));
        }
        ys
    }

    fn derivatives(&self, s: C64, k: usize) -> Result<Vec<CMat>> {
        let lu = self.factor(s)?;
        let m = self.d.ncols();
        let xs = self.solve_chain(&lu, s, k, &CMat::identity(m, m));
        let cd: Vec<CMat> = (0..=k).map(|i| self.c_at(s, i)).collect();
        let mut out = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let mut h = CMat::zeros(self.d.nrows(), m);
            for i in 0..=j {
                h += &cd[i] * &xs[j - i] * C64::new(binom(j, i), 0.0);
            }
            if j == 0 {
                h += to_complex(&self.d);
            }
            out.push(h);
        }
        Ok(out)
    }

    /// Term tags of `(K, B, C)` in order.
    pub fn structure(&self) -> (Vec<ScalarSFunction>, Vec<ScalarSFunction>, Vec<ScalarSFunction>) {
        let tags = |t: &[Term]| t.iter().map(|x| x.f).collect();
        (tags(&self.k), tags(&self.b), tags(&self.c))
    }

    /// `(E, A0, A1, τ)` when the system is `C(sE − A0 − e^{−τs}A1)^{-1}B`
    /// with constant `B`, `C`.
    pub fn delay_parts(&self) -> Result<(RMat, RMat, RMat, f64)> {
        let bad = |why: &str| MorError::NotADelaySystem(why.to_string());
        if self.b.len() != 1 || self.c.len() != 1 {
            return Err(bad("B and C must be constant"));
        }
        if self.b[0].f != ScalarSFunction::Power(0) || self.c[0].f != ScalarSFunction::Power(0) {
            return Err(bad("B and C must be constant"));
        }
        let n = self.order();
        let (mut e, mut a0, mut a1, mut tau) = (RMat::zeros(n, n), RMat::zeros(n, n), None, None);
        for t in &self.k {
            match t.f {
                ScalarSFunction::Power(1) => e += &t.matrix,
                ScalarSFunction::Power(0) => a0 -= &t.matrix,
                ScalarSFunction::Delay(d) => {
                    if tau.is_some_and(|x| x != d) {
                        return Err(bad("more than one delay"));
                    }
                    tau = Some(d);
                    a1 = Some(a1.unwrap_or_else(|| RMat::zeros(n, n)) - &t.matrix);
                }
                ScalarSFunction::Power(k) => return Err(bad(&format!("K contains s^{k}"))),
            }
        }
        match (a1, tau) {
            (Some(a1), Some(tau)) => Ok((e, a0, a1, tau)),
            _ => Err(bad("no delay term")),
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl TransferFunction for CoprimeSystem {
    fn inputs(&self) -> usize {
        self.d.ncols()
    }
    fn outputs(&self) -> usize {
        self.d.nrows()
    }
    fn eval(&self, s: C64) -> Result<CMat> {
        Ok(self.derivatives(s, 0)?.remove(0))
    }
    fn eval_with_derivative(&self, s: C64) -> Result<(CMat, CMat)> {
        let mut v = self.derivatives(s, 1)?;
        let d1 = v.pop().unwrap();
        Ok((v.pop().unwrap(), d1))
    }
    fn eval_derivative(&self, s: C64, k: usize) -> Result<CMat> {
        Ok(self.derivatives(s, k)?.pop().unwrap())
    }
}

/// Right chains `D^j[K^{-1}B](σ) r` for `j < N` per point.
pub fn coprime_right_chains(sys: &CoprimeSystem, data: &TangentData) -> Result<CMat> {
    data.check_dims(sys.inputs(), sys.outputs())?;
    let mut cols = Vec::with_capacity(data.right_count());
    for ((&s, r), &order) in data.right_points.iter().zip(&data.right_dirs).zip(&data.right_orders) {
        let lu = sys.factor(s)?;
        for x in sys.solve_chain(&lu, s, order - 1, &as_col(r)) {
            cols.push(x.column(0).into_owned());
        }
    }
    Ok(interp::stack_columns(sys.order(), &cols))
}

/// Left chains `D^j[K^{-T}Cᵀ](μ) ℓ` for `j < M` per point.
pub fn coprime_left_chains(sys: &CoprimeSystem, data: &TangentData) -> Result<CMat> {
    data.check_dims(sys.inputs(), sys.outputs())?;
    let mut cols = Vec::with_capacity(data.left_count());
    for ((&s, l), &order) in data.left_points.iter().zip(&data.left_dirs).zip(&data.left_orders) {
        let lu = sys.factor(s)?;
        for y in sys.solve_chain_transpose(&lu, s, order - 1, &as_col(l)) {
            cols.push(y.column(0).into_owned());
        }
    }
    Ok(interp::stack_columns(sys.order(), &cols))
}

pub fn coprime_bases(sys: &CoprimeSystem, data: &TangentData, mode: BasisMode) -> Result<ReductionBases> {
    let vc = coprime_right_chains(sys, data)?;
    let wc = coprime_left_chains(sys, data)?;
    let (v, w) = match mode {
        BasisMode::Raw => (interp::realify_keep_dim(&vc)?, interp::realify_keep_dim(&wc)?),
        BasisMode::Orthonormal => (
            interp::realify_and_orthogonalize(&vc)?,
            interp::realify_and_orthogonalize(&wc)?,
        ),
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

/// Project every term: `K_r = WᵀK_jV`, `B_r = WᵀB_j`, `C_r = C_jV`.
pub fn coprime_project(sys: &CoprimeSystem, v: &RMat, w: &RMat) -> Result<CoprimeSystem> {
    let n = sys.order();
    if v.nrows() != n || w.nrows() != n || v.ncols() != w.ncols() {
        return Err(MorError::DimensionMismatch(format!("bases must both be {n} x r")));
    }
    let k = sys.k.iter().map(|t| Term::new(t.f, project_matrix(w, &t.matrix, v))).collect();
    let b = sys.b.iter().map(|t| Term::new(t.f, w.transpose() * &t.matrix)).collect();
    let c = sys.c.iter().map(|t| Term::new(t.f, &t.matrix * v)).collect();
    Ok(CoprimeSystem { k, b, c, d: sys.d.clone() })
}

/// Structure-preserving interpolatory reduction.
pub fn coprime_reduce(sys: &CoprimeSystem, data: &TangentData, mode: BasisMode) -> Result<CoprimeSystem> {
    let bases = coprime_bases(sys, data, mode)?;
    let red = coprime_project(sys, &bases.v, &bases.w)?;
    for &s in data.right_points.iter().chain(&data.left_points) {
        let kr = red.k_at(s, 0);
        if linalg::singular_values_c(&kr).last().copied().unwrap_or(0.0)
            <= 1e-13 * linalg::singular_values_c(&kr).first().copied().unwrap_or(0.0)
        {
            return Err(MorError::SingularReducedK(s));
        }
    }
    Ok(red)
}

/// Second-order Padé replacement of `e^{−τs}` in a single-delay system:
/// `(12C + 6τsC + τ²s²C)(s³N + s²M + sG + K)^{-1}B` with `N = τ²E`,
/// `M = 6τE − τ²(A0 + A1)`, `G = 12E + 6τ(A1 − A0)`, `K = −12(A0 + A1)`.
pub fn pade2_delay_baseline(sys: &CoprimeSystem) -> Result<CoprimeSystem> {
    let (e, a0, a1, tau) = sys.delay_parts()?;
    let sum = &a0 + &a1;
    let c = &sys.c[0].matrix;
    let b = &sys.b[0].matrix;
    let t2 = tau * tau;
    CoprimeSystem::new(
        vec![
            Term::new(ScalarSFunction::Power(3), &e * t2),
            Term::new(ScalarSFunction::Power(2), &e * (6.0 * tau) - &sum * t2),
            Term::new(ScalarSFunction::Power(1), &e * 12.0 + (&a1 - &a0) * (6.0 * tau)),
            Term::new(ScalarSFunction::Power(0), &sum * -12.0),
        ],
        vec![Term::new(ScalarSFunction::Power(0), b.clone())],
        vec![
            Term::new(ScalarSFunction::Power(0), c * 12.0),
            Term::new(ScalarSFunction::Power(1), c * (6.0 * tau)),
            Term::new(ScalarSFunction::Power(2), c * t2),
        ],
        sys.d.clone(),
    )
}

/// `e_1` input and output vectors.
pub(crate) fn unit_column(n: usize) -> RMat {
    let mut b = RMat::zeros(n, 1);
    b[(0, 0)] = 1.0;
    b
}
