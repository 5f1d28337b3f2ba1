//! Dense linear-algebra kernels shared by the reduction routines.
//!
//! Everything here works at desk scale: partial-pivoted LU for shifted solves,
//! complex Schur based eigendecompositions, SVD-based rank truncation and a
//! Bartels–Stewart Sylvester solver.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{MorError, Result};
use crate::{CMat, RMat, C64};

pub(crate) const EPS: f64 = f64::EPSILON;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `W^T M V` evaluated as `(W^T M) V`.
pub fn project_matrix(w: &RMat, m: &RMat, v: &RMat) -> RMat {
    (w.transpose() * m) * v
}

/// LU factorization with partial pivoting of a square complex matrix.
///
/// Keeps a single factorization usable for both `M x = b` and `M^T x = b`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    singular: bool,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    pub fn new(mut m: CMat) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU of a non-square matrix");
        let scale = max_abs(&m);
        let tiny = (n.max(1) as f64) * EPS * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = scale == 0.0 && n > 0;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let mut p = k;
            let mut best = m[(k, k)].norm();
            for i in (k + 1)..n {
                let v = m[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            if best <= tiny {
                singular = true;
                continue;
            }
            if p != k {
                m.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = m[(k, k)];
            for i in (k + 1)..n {
                let f = m[(i, k)] / pivot;
                m[(i, k)] = f;
                if f != C64::new(0.0, 0.0) {
                    for j in (k + 1)..n {
                        let u = m[(k, j)];
                        m[(i, j)] -= f * u;
                    }
                }
            }
        }
        Lu { lu: m, perm, singular, min_pivot, max_pivot }
    }

    pub fn from_real(m: &RMat) -> Self {
        Lu::new(to_complex(m))
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Ratio of smallest to largest pivot; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    /// Solves `M X = B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut x = CMat::zeros(n, b.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            x.set_row(i, &b.row(p));
        }
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    /// Solves `M^T X = B` (plain transpose).
    pub fn solve_transpose(&self, b: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut y = b.clone();
        for c in 0..b.ncols() {
            // U^T z = b
            for i in 0..n {
                let mut s = y[(i, c)];
                for k in 0..i {
                    s -= self.lu[(k, i)] * y[(k, c)];
                }
                y[(i, c)] = s / self.lu[(i, i)];
            }
            // L^T w = z
            for i in (0..n).rev() {
                let mut s = y[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(k, i)] * y[(k, c)];
                }
                y[(i, c)] = s;
            }
        }
        let mut x = CMat::zeros(n, b.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            x.set_row(p, &y.row(i));
        }
        x
    }

    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.dim(), self.dim()))
    }
}

/// Eigenvalues and unit-norm right eigenvectors of a complex matrix.
pub fn eig(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), EPS, 100 * n.max(10))
        .ok_or(MorError::EigenFailure)?;
    let (q, t) = schur.unpack();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let small = EPS * scale;
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        vals.push(lam);
        let mut x = DVector::<C64>::zeros(n);
        x[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            x[i] = -s / d;
        }
        let v = &q * x;
        let nrm = v.norm();
        vecs.set_column(k, &(v / C64::new(nrm, 0.0)));
    }
    Ok((vals, vecs))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), EPS, 100 * m.nrows().max(10))
        .ok_or(MorError::EigenFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..m.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn singular_values(m: &RMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn singular_values_c(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Ratio `σ_min / σ_max`, zero for an empty or zero matrix.
pub fn inverse_condition(m: &RMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Orthonormal basis of the column span, dropping directions whose singular
/// value falls below `rel_tol · σ_max`. Columns are normalized first so the
/// test is insensitive to their individual scaling.
pub fn orthonormal_span(cols: &RMat, rel_tol: f64) -> RMat {
    let n = cols.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for c in cols.column_iter() {
        let nrm = c.norm();
        if nrm > 0.0 && nrm.is_finite() {
            kept.push(c / nrm);
        }
    }
    if kept.is_empty() || n == 0 {
        return RMat::zeros(n, 0);
    }
    let m = RMat::from_columns(&kept);
    let k = numerical_rank(&m, rel_tol);
    if k == 0 {
        return RMat::zeros(n, 0);
    }
    let mut q = range_basis(&m, k);
    fix_signs(&mut q);
    q
}

fn numerical_rank(m: &RMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Orthonormal basis of the dominant rank-`k` column space, taken as the QR
/// factor of `m V_k`; this is more accurate than the SVD's left vectors.
pub fn range_basis(m: &RMat, k: usize) -> RMat {
    if k == 0 {
        return RMat::zeros(m.nrows(), 0);
    }
    let (r, c) = m.shape();
    let mut padded = RMat::zeros(r.max(c), c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let rows: Vec<_> = order[..k].iter().map(|&i| vt.row(i).transpose()).collect();
    let vk = RMat::from_columns(&rows);
    let q = (m * vk).qr().q();
    q.columns(0, k).into_owned()
}

/// Thin orthonormal factor of a full-column-rank matrix (dimension kept).
pub fn orthonormal_columns(m: &RMat) -> Result<RMat> {
    if m.ncols() == 0 {
        return Ok(m.clone());
    }
    if m.ncols() > m.nrows() {
        return Err(MorError::RankCollapse);
    }
    let s = singular_values(m);
    if s[0] == 0.0 || s[s.len() - 1] <= 1e-13 * s[0] {
        return Err(MorError::RankCollapse);
    }
    let qr = m.clone().qr();
    Ok(qr.q())
}

/// Make the largest-magnitude entry of every column positive.
fn fix_signs(q: &mut RMat) {
    for mut c in q.column_iter_mut() {
        let (mut best, mut val) = (0.0, 0.0);
        for &x in c.iter() {
            if x.abs() > best {
                best = x.abs();
                val = x;
            }
        }
        if val < 0.0 {
            c.neg_mut();
        }
    }
}

/// Orthonormal basis of the null space of `m` (singular values below
/// `rel_tol · σ_max`, or all of the domain when `m` is zero).
pub fn null_space(m: &RMat, rel_tol: f64) -> RMat {
    let ncols = m.ncols();
    if ncols == 0 {
        return RMat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return RMat::identity(ncols, ncols);
    }
    // pad to square so the SVD returns a full set of right singular vectors
    let mut padded = RMat::zeros(m.nrows().max(ncols), ncols);
    padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= rel_tol * smax)
        .map(|i| vt.row(i).transpose().into_owned())
        .collect();
    if cols.is_empty() {
        RMat::zeros(ncols, 0)
    } else {
        RMat::from_columns(&cols)
    }
}

/// How a list of (nominally conjugate-closed) points pairs up.
#[derive(Clone, Debug, PartialEq)]
pub enum Pairing {
    Real(usize),
    /// `(i, j)` with `Im p_i > 0` and `p_j ≈ conj(p_i)`.
    Pair(usize, usize),
}

/// Pair each point with positive imaginary part to its conjugate partner.
/// Returns `None` when the set is not closed under conjugation within `tol`
/// (relative to the point magnitude).
pub fn conjugate_pairing(points: &[C64], tol: f64) -> Option<Vec<Pairing>> {
    let n = points.len();
    let mut used = vec![false; n];
    let mut out = Vec::new();
    let is_real = |z: C64| z.im.abs() <= tol * z.norm().max(1.0);
    for i in 0..n {
        if used[i] {
            continue;
        }
        let z = points[i];
        if is_real(z) {
            used[i] = true;
            out.push(Pairing::Real(i));
            continue;
        }
        let target = z.conj();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == i || used[j] || is_real(points[j]) {
                continue;
            }
            let d = (points[j] - target).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best?;
        if d > tol * z.norm().max(1.0) {
            return None;
        }
        used[i] = true;
        used[j] = true;
        if z.im > 0.0 {
            out.push(Pairing::Pair(i, j));
        } else {
            out.push(Pairing::Pair(j, i));
        }
    }
    Some(out)
}

/// Unitary-up-to-scaling transform `T` such that `X T` replaces each
/// conjugate column pair `(x, conj x)` by `(Re x, Im x)`.
pub fn pairing_transform(pairing: &[Pairing], n: usize) -> CMat {
    let mut t = CMat::zeros(n, n);
    let half = C64::new(0.5, 0.0);
    let ihalf = C64::new(0.0, 0.5);
    for p in pairing {
        match *p {
            Pairing::Real(i) => t[(i, i)] = C64::new(1.0, 0.0),
            Pairing::Pair(i, j) => {
                t[(i, i)] = half;
                t[(j, i)] = half;
                t[(i, j)] = -ihalf;
                t[(j, j)] = ihalf;
            }
        }
    }
    t
}

/// Solves `A X + X B = C` by Bartels–Stewart on complex Schur forms, falling
/// back to a Kronecker-product solve for small problems if the Schur route
/// fails or leaves a large residual.
pub fn sylvester(a: &RMat, b: &RMat, c: &RMat) -> Result<RMat> {
    let (n, m) = (a.nrows(), b.nrows());
    if a.ncols() != n || b.ncols() != m || c.nrows() != n || c.ncols() != m {
        return Err(MorError::DimensionMismatch("sylvester operands".into()));
    }
    if n == 0 || m == 0 {
        return Ok(RMat::zeros(n, m));
    }
    let scale = a.norm() * 1.0 + b.norm();
    let attempt = bartels_stewart(a, b, c);
    if let Ok(x) = &attempt {
        let res = (a * x + x * b - c).norm();
        if res <= 1e-9 * (scale * x.norm() + c.norm()).max(f64::MIN_POSITIVE) {
            return attempt;
        }
    }
    if n * m <= 2500 {
        return kronecker_sylvester(a, b, c);
    }
    attempt
}

fn bartels_stewart(a: &RMat, b: &RMat, c: &RMat) -> Result<RMat> {
    let (n, m) = (a.nrows(), b.nrows());
    let sa = nalgebra::linalg::Schur::try_new(to_complex(a), EPS, 100 * n.max(10))
        .ok_or_else(|| MorError::LyapunovFailure("Schur form of A".into()))?;
    let sb = nalgebra::linalg::Schur::try_new(to_complex(b), EPS, 100 * m.max(10))
        .ok_or_else(|| MorError::LyapunovFailure("Schur form of B".into()))?;
    let (u, r) = sa.unpack();
    let (v, s) = sb.unpack();
    let f = u.adjoint() * to_complex(c) * &v;
    let mut y = CMat::zeros(n, m);
    for j in 0..m {
        let mut rhs = f.column(j).into_owned();
        for k in 0..j {
            let skj = s[(k, j)];
            if skj != C64::new(0.0, 0.0) {
                rhs -= y.column(k) * skj;
            }
        }
        let shift = s[(j, j)];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in (i + 1)..n {
                acc -= r[(i, k)] * y[(k, j)];
            }
            let d = r[(i, i)] + shift;
            if d.norm() <= EPS * (r[(i, i)].norm() + shift.norm()).max(f64::MIN_POSITIVE) {
                return Err(MorError::LyapunovFailure(
                    "A and -B share an eigenvalue".into(),
                ));
            }
            y[(i, j)] = acc / d;
        }
    }
    Ok(real_part(&(u * y * v.adjoint())))
}

fn kronecker_sylvester(a: &RMat, b: &RMat, c: &RMat) -> Result<RMat> {
    let (n, m) = (a.nrows(), b.nrows());
    let nm = n * m;
    let mut k = RMat::zeros(nm, nm);
    // vec(AX) = (I ⊗ A) vec X, vec(XB) = (B^T ⊗ I) vec X
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for p in 0..n {
                k[(row, j * n + p)] += a[(i, p)];
            }
            for q in 0..m {
                k[(row, q * n + i)] += b[(q, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(nm, c.iter().copied());
    let lu = k.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| MorError::LyapunovFailure("singular Kronecker operator".into()))?;
    Ok(RMat::from_iterator(n, m, x.iter().copied()))
}

/// Solves `A X + X A^T + Q = 0`.
pub fn lyapunov(a: &RMat, q: &RMat) -> Result<RMat> {
    let x = sylvester(a, &a.transpose(), &(-q))?;
    Ok((&x + x.transpose()) * 0.5)
}

/// Column vector as an `n × 1` matrix.
pub fn as_col(v: &DVector<C64>) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}
