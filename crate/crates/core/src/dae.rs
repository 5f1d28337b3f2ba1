//! Descriptor systems with singular `E`: spectral projectors, the split
//! `H = G + P` into strictly proper and polynomial parts, and interpolatory
//! reduction that keeps `P` intact.

use crate::error::{MorError, Result};
use crate::interp::{self, TangentData};
use crate::linalg::{self, Lu};
use crate::lti::{self, DescriptorSystem};
use crate::{CMat, RMat, C64};

/// Relative singular-value cutoff used for nullity decisions.
const NULL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SpectralProjectors {
    /// Left projector onto the finite deflating subspace.
    pub p_l: RMat,
    /// Right projector onto the finite deflating subspace.
    pub p_r: RMat,
    pub v_inf: RMat,
    pub w_inf: RMat,
    /// Nilpotency index of the infinite part (0 when `E` is nonsingular).
    pub index: usize,
    split: Split,
}

/// Bases `T = [T_f, T_∞]` and `S = (s0E − A)T` that block-diagonalize the pencil.
#[derive(Clone, Debug)]
struct Split {
    t: RMat,
    s: RMat,
    n_fin: usize,
}

fn hcat(a: &RMat, b: &RMat) -> RMat {
    let mut out = RMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Spectral projectors of `λE − A` via the shift-and-invert operator
/// `M = (s0E − A)^{-1}E`: the infinite deflating subspace is `Ker M^ν` and
/// the finite one `Ran M^ν`, `ν` being the index at which the kernel stops
/// growing.
pub fn spectral_projectors(sys: &DescriptorSystem) -> Result<SpectralProjectors> {
    let n = sys.order();
    let (e, a) = (sys.e(), sys.a());
    let (s0, lu) = lti::regular_shift(e, a)?;
    let m = linalg::real_part(&lu.solve(&linalg::to_complex(e)));
    let mut power = RMat::identity(n, n);
    let mut index = 0;
    let mut prev = 0;
    for k in 1..=n.max(1) {
        let next = &power * &m;
        let nul = lti::nullity(&next);
        if nul == prev && k > 1 {
            break;
        }
        power = next;
        index = k;
        if nul == 0 {
            index = 0;
            break;
        }
        prev = nul;
    }
    let n_inf = if index == 0 { 0 } else { lti::nullity(&power) };
    let n_fin = n - n_inf;
    let (t_f, t_inf) = if n_inf == 0 {
        (RMat::identity(n, n), RMat::zeros(n, 0))
    } else {
        let ker = linalg::null_space(&power, NULL_TOL);
        if ker.ncols() != n_inf {
            return Err(MorError::SingularPencilFamily);
        }
        (linalg::range_basis(&power, n_fin), linalg::orthonormal_span(&ker, 1e-14))
    };
    let t = hcat(&t_f, &t_inf);
    if t.ncols() != n || linalg::inverse_condition(&t) < 1e-12 {
        return Err(MorError::SingularPencilFamily);
    }
    let s = (e * s0 - a) * &t;
    let tinv = t.clone().try_inverse().ok_or(MorError::SingularPencilFamily)?;
    let sinv = s.clone().try_inverse().ok_or(MorError::SingularPencilFamily)?;
    let mut sel = RMat::zeros(n, n);
    for i in 0..n_fin {
        sel[(i, i)] = 1.0;
    }
    let p_r = &t * &sel * &tinv;
    let p_l = &s * &sel * &sinv;
    let w_inf = if n_inf == 0 {
        RMat::zeros(n, 0)
    } else {
        let z_inf = sinv.rows(n_fin, n_inf).transpose();
        linalg::orthonormal_span(&z_inf, 1e-14)
    };
    Ok(SpectralProjectors { p_l, p_r, v_inf: t_inf, w_inf, index, split: Split { t, s, n_fin } })
}

/// `H(s) = G(s) + P(s)` with `G` strictly proper and `P(s) = Σ_k s^k P_k`.
#[derive(Clone, Debug)]
pub struct AdditiveDecomposition {
    pub g: DescriptorSystem,
    pub poly: Vec<RMat>,
}

impl AdditiveDecomposition {
    pub fn eval_poly(&self, s: C64) -> CMat {
        let (p, m) = self.poly[0].shape();
        let mut out = CMat::zeros(p, m);
        let mut sk = C64::new(1.0, 0.0);
        for c in &self.poly {
            out += linalg::to_complex(c) * sk;
            sk *= s;
        }
        out
    }

    pub fn eval_g(&self, s: C64) -> Result<CMat> {
        if self.g.order() == 0 {
            return Ok(CMat::zeros(self.poly[0].nrows(), self.poly[0].ncols()));
        }
        self.g.transfer(s)
    }

    pub fn eval(&self, s: C64) -> Result<CMat> {
        Ok(self.eval_g(s)? + self.eval_poly(s))
    }

    /// Degree of `P` after dropping trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.poly.len().saturating_sub(1)
    }
}

pub fn additive_decomposition(sys: &DescriptorSystem) -> Result<AdditiveDecomposition> {
    let proj = spectral_projectors(sys)?;
    additive_from(sys, &proj)
}

fn additive_from(sys: &DescriptorSystem, proj: &SpectralProjectors) -> Result<AdditiveDecomposition> {
    let Split { t, s, n_fin } = &proj.split;
    let n = sys.order();
    let n_inf = n - n_fin;
    let slu = Lu::from_real(s);
    let solve = |x: &RMat| linalg::real_part(&slu.solve(&linalg::to_complex(x)));
    let et = solve(&(sys.e() * t));
    let at = solve(&(sys.a() * t));
    let bt = solve(sys.b());
    let ct = sys.c() * t;
    let f = *n_fin;
    let g = DescriptorSystem::strictly_proper(
        et.view((0, 0), (f, f)).into_owned(),
        at.view((0, 0), (f, f)).into_owned(),
        bt.rows(0, f).into_owned(),
        ct.columns(0, f).into_owned(),
    )?;
    let mut poly = vec![sys.d().clone()];
    if n_inf > 0 {
        let e_inf = et.view((f, f), (n_inf, n_inf)).into_owned();
        let a_inf = at.view((f, f), (n_inf, n_inf)).into_owned();
        let b_inf = bt.rows(f, n_inf).into_owned();
        let c_inf = ct.columns(f, n_inf).into_owned();
        let alu = a_inf.clone().lu();
        let mut x = alu.solve(&b_inf).ok_or(MorError::SingularPencilFamily)?;
        let scale = (sys.c().norm() * sys.b().norm()).max(f64::MIN_POSITIVE);
        for k in 0..n_inf.max(1) {
            let coeff = -(&c_inf * &x);
            if k == 0 {
                poly[0] += coeff;
            } else {
                poly.push(coeff);
            }
            x = alu.solve(&(&e_inf * &x)).ok_or(MorError::SingularPencilFamily)?;
        }
        while poly.len() > 1 && poly.last().unwrap().norm() <= 1e-12 * scale {
            poly.pop();
        }
    }
    Ok(AdditiveDecomposition { g, poly })
}

#[derive(Clone, Debug)]
pub struct DaeReduction {
    pub reduced: DescriptorSystem,
    /// Columns coming from the tangential conditions.
    pub finite_order: usize,
    /// Columns appended from the infinite deflating subspaces.
    pub infinite_dim: usize,
}

/// Interpolatory reduction with `V = [V_f, V_∞]`, `W = [W_f, W_∞]`, where
/// `V_f`, `W_f` are built from the projected inputs `P_l B r` and `P_rᵀCᵀℓ`.
pub fn dae_reduce(sys: &DescriptorSystem, data: &TangentData) -> Result<DaeReduction> {
    let proj = spectral_projectors(sys)?;
    let projected = DescriptorSystem::new(
        sys.e().clone(),
        sys.a().clone(),
        &proj.p_l * sys.b(),
        sys.c() * &proj.p_r,
        sys.d().clone(),
    )?;
    let vf = interp::realify_and_orthogonalize(&interp::right_chains(&projected, data)?)?;
    let wf = interp::realify_and_orthogonalize(&interp::left_chains(&projected, data)?)?;
    if vf.ncols() != wf.ncols() {
        return Err(MorError::InvalidInput(format!(
            "right and left bases have different dimensions ({} vs {})",
            vf.ncols(),
            wf.ncols()
        )));
    }
    let v = hcat(&vf, &proj.v_inf);
    let w = hcat(&wf, &proj.w_inf);
    let reduced = interp::project_unchecked(sys, &v, &w)?;
    if lti::regular_shift(reduced.e(), reduced.a()).is_err() {
        return Err(MorError::SingularReducedPencil);
    }
    if proj.v_inf.ncols() == 0 && linalg::inverse_condition(reduced.e()) <= 1e-13 {
        return Err(MorError::SingularReducedPencil);
    }
    Ok(DaeReduction { reduced, finite_order: vf.ncols(), infinite_dim: proj.v_inf.ncols() })
}
