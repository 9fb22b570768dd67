//! Dense rank-revealing helpers built on nalgebra's SVD and symmetric eigensolver.
//!
//! Rank decisions follow one convention throughout the crate: a singular value
//! counts as zero when it is at most `tol * sigma_max * max(rows, cols)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{PhdaeError, Result};

/// Default relative tolerance for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-11;

/// Singular value decomposition of a square matrix with full orthogonal factors,
/// singular values sorted in decreasing order and a reproducible sign convention.
#[derive(Clone, Debug)]
pub struct SquareSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SquareSvd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "SquareSvd expects a square matrix");
        let n = a.nrows();
        if n == 0 {
            return Self {
                u: DMatrix::zeros(0, 0),
                singular_values: Vec::new(),
                v: DMatrix::zeros(0, 0),
            };
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v requested").transpose();
        let mut order: Vec<usize> = (0..n).collect();
        let sv = svd.singular_values;
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        let smax = sv.max();

        let mut us = DMatrix::zeros(n, n);
        let mut vs = DMatrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            let mut ucol = u.column(src).into_owned();
            let mut vcol = v.column(src).into_owned();
            // first entry of each right singular vector made nonnegative
            if leading_sign(&vcol) < 0.0 {
                ucol.neg_mut();
                vcol.neg_mut();
            }
            // on the kernel the left vector is unrelated to the right one
            if sv[src] <= RANK_TOL * smax * n as f64 && leading_sign(&ucol) < 0.0 {
                ucol.neg_mut();
            }
            us.set_column(dst, &ucol);
            vs.set_column(dst, &vcol);
            s.push(sv[src]);
        }
        Self {
            u: us,
            singular_values: s,
            v: vs,
        }
    }

    pub fn rank(&self, tol: f64) -> usize {
        let n = self.u.nrows();
        numerical_rank(&self.singular_values, n, n, tol)
    }
}

fn leading_sign(v: &DVector<f64>) -> f64 {
    let scale = v.amax();
    for &x in v.iter() {
        if x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return x.signum();
        }
    }
    1.0
}

/// Count singular values above `tol * sigma_max * max(rows, cols)`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize, tol: f64) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    scaled_rank(singular_values, rows, cols, tol, smax)
}

/// Count singular values above `tol * scale * max(rows, cols)`.
///
/// Used when a matrix is a product with orthonormal factors and its own
/// largest singular value may itself be round-off; `scale` is then the norm
/// of the data it was computed from.
pub fn scaled_rank(singular_values: &[f64], rows: usize, cols: usize, tol: f64, scale: f64) -> usize {
    if scale == 0.0 {
        return 0;
    }
    let threshold = tol * scale * rows.max(cols) as f64;
    singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Singular values of `a` in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    numerical_rank(&singular_values(a), a.nrows(), a.ncols(), tol)
}

/// Rank with the threshold taken relative to `scale` instead of `sigma_max(a)`.
pub fn rank_scaled(a: &DMatrix<f64>, tol: f64, scale: f64) -> usize {
    scaled_rank(&singular_values(a), a.nrows(), a.ncols(), tol, scale)
}

/// Full right singular basis of a possibly rectangular matrix.
///
/// Returns `(V, s)` with `V` of size `cols x cols`, columns ordered by decreasing
/// singular value (padded with zeros when `rows < cols`).
fn right_singular_basis(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (r, c) = a.shape();
    if c == 0 {
        return (DMatrix::zeros(0, 0), Vec::new());
    }
    if r == 0 {
        return (DMatrix::identity(c, c), vec![0.0; c]);
    }
    let tall = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = tall.svd(false, true);
    let vt = svd.v_t.expect("v requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let mut v = DMatrix::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vt.row(src).transpose();
        if leading_sign(&col) < 0.0 {
            col.neg_mut();
        }
        v.set_column(dst, &col);
        s.push(sv[src]);
    }
    (v, s)
}

fn split_rank(a: &DMatrix<f64>, tol: f64, scale: Option<f64>) -> (DMatrix<f64>, usize) {
    let c = a.ncols();
    let (v, s) = right_singular_basis(a);
    let rk = match scale {
        Some(scale) => scaled_rank(&s, a.nrows(), c, tol, scale),
        None => numerical_rank(&s, a.nrows(), c, tol),
    };
    (v, rk)
}

/// Orthonormal basis (as columns) of the right null space of `a`.
pub fn right_null(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (v, rk) = split_rank(a, tol, None);
    v.columns(rk, a.ncols() - rk).into_owned()
}

/// [`right_null`] with the rank threshold relative to `scale`.
pub fn right_null_scaled(a: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    let (v, rk) = split_rank(a, tol, Some(scale));
    v.columns(rk, a.ncols() - rk).into_owned()
}

/// Orthonormal basis (as columns) of the left null space of `a`.
pub fn left_null(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    right_null(&a.transpose(), tol)
}

/// [`left_null`] with the rank threshold relative to `scale`.
pub fn left_null_scaled(a: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    right_null_scaled(&a.transpose(), tol, scale)
}

/// Orthonormal basis (as rows) of the row space of `a`.
pub fn row_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (v, rk) = split_rank(a, tol, None);
    v.columns(0, rk).transpose()
}

/// [`row_basis`] with the rank threshold relative to `scale`.
pub fn row_basis_scaled(a: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    let (v, rk) = split_rank(a, tol, Some(scale));
    v.columns(0, rk).transpose()
}

/// Orthonormal basis (as columns) of the column space of `a`.
pub fn col_basis(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    row_basis(&a.transpose(), tol).transpose()
}

/// [`col_basis`] with the rank threshold relative to `scale`.
pub fn col_basis_scaled(a: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    row_basis_scaled(&a.transpose(), tol, scale).transpose()
}

/// Completes orthonormal columns `q` (n x k) to an orthogonal matrix `[comp, q]`
/// and returns the complement `comp` (n x (n-k)).
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    if q.ncols() == 0 {
        return DMatrix::identity(n, n);
    }
    right_null(&q.transpose(), RANK_TOL)
}

/// Largest singular value.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().cloned().unwrap_or(0.0)
}

/// Smallest singular value of a square matrix (0 for an empty matrix).
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    singular_values(a).last().cloned().unwrap_or(0.0)
}

/// 2-norm condition number of a square matrix.
pub fn cond(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `a`; 0 for an empty matrix.
pub fn min_sym_eig(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let eig = sym(a).symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Solve `a x = b` by LU; fails if `a` is numerically singular.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(PhdaeError::ShapeMismatch {
            context: format!("linear solve for {what}"),
            expected: (a.nrows(), a.nrows()),
            found: (b.nrows(), a.ncols()),
        });
    }
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let smin = sigma_min(a);
    let smax = norm2(a);
    if smin <= RANK_TOL * smax * a.nrows() as f64 || smax == 0.0 {
        return Err(PhdaeError::Singular {
            what: what.to_string(),
            sigma_min: smin,
            at: String::new(),
        });
    }
    a.clone().lu().solve(b).ok_or_else(|| PhdaeError::Singular {
        what: what.to_string(),
        sigma_min: smin,
        at: String::new(),
    })
}

/// Minimum-norm least-squares solution via the pseudo-inverse.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = tol * smax * a.nrows().max(a.ncols()) as f64;
    svd.solve(b, eps).expect("u and v were computed")
}

/// Block-diagonal concatenation.
pub fn blkdiag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assemble a matrix from a grid of blocks; every row of blocks must agree in height.
pub fn block(rows: &[Vec<&DMatrix<f64>>]) -> DMatrix<f64> {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut out = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            assert_eq!(b.shape(), (heights[i], widths[j]), "block ({i},{j}) has wrong shape");
            out.view_mut((r0, c0), b.shape()).copy_from(*b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    out
}

/// Frobenius norm, the residual norm used in reports.
pub fn fro(a: &DMatrix<f64>) -> f64 {
    a.norm()
}
