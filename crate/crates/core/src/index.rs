//! Derivative arrays and strangeness-index analysis for constant-coefficient
//! behavior systems `Eb v' = Ab v` with `v = [x; u]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PhdaeError, Result};
use crate::linalg::{self, SquareSvd, RANK_TOL};
use crate::system::PhdaeSystem;

/// `Eb = [E, 0]` and `Ab = [(J - R) Q - E K, B - P]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorPencil {
    pub eb: DMatrix<f64>,
    pub ab: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
}

impl BehaviorPencil {
    pub fn from_system(sys: &PhdaeSystem) -> Result<Self> {
        let c = sys.constant_snapshot("derivative-array index analysis")?;
        let (n, m) = (sys.n(), sys.m());
        let mut eb = DMatrix::zeros(n, n + m);
        eb.view_mut((0, 0), (n, n)).copy_from(&c.e);
        let mut ab = DMatrix::zeros(n, n + m);
        ab.view_mut((0, 0), (n, n)).copy_from(&c.a());
        ab.view_mut((0, n), (n, m)).copy_from(&c.input());
        Ok(Self { eb, ab, n, m })
    }

    /// Pencil `E x' = A x (+ B u)`; pass a zero-column `B` for no inputs.
    pub fn from_matrices(e: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let n = e.nrows();
        if e.shape() != (n, n) || a.shape() != (n, n) || b.nrows() != n {
            return Err(PhdaeError::ShapeMismatch {
                context: "behavior pencil".into(),
                expected: (n, n),
                found: a.shape(),
            });
        }
        let m = b.ncols();
        let mut eb = DMatrix::zeros(n, n + m);
        eb.view_mut((0, 0), (n, n)).copy_from(e);
        let mut ab = DMatrix::zeros(n, n + m);
        ab.view_mut((0, 0), (n, n)).copy_from(a);
        ab.view_mut((0, n), (n, m)).copy_from(b);
        Ok(Self { eb, ab, n, m })
    }

    /// The pencil with the input fixed to zero.
    pub fn free_response(&self) -> Self {
        Self {
            eb: self.eb.columns(0, self.n).into_owned(),
            ab: self.ab.columns(0, self.n).into_owned(),
            n: self.n,
            m: 0,
        }
    }

    /// Stacked array at level `mu`, written as `Nmat v + M [v'; ...; v^(mu+1)] = 0`.
    ///
    /// Row block `i` is the `i`-th derivative of `Eb v' - Ab v = 0`: it has
    /// `-Ab` in the `v^(i)` column and `Eb` in the `v^(i+1)` column. `M` is
    /// `(mu+1) n x (mu+1)(n+m)` and `Nmat` is `(mu+1) n x (n+m)` with `-Ab` in
    /// its first block.
    pub fn derivative_array(&self, mu: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, w) = (self.n, self.n + self.m);
        let mut big = DMatrix::zeros((mu + 1) * n, (mu + 1) * w);
        let mut nmat = DMatrix::zeros((mu + 1) * n, w);
        nmat.view_mut((0, 0), (n, w)).copy_from(&(-&self.ab));
        for i in 0..=mu {
            big.view_mut((i * n, i * w), (n, w)).copy_from(&self.eb);
            if i > 0 {
                big.view_mut((i * n, (i - 1) * w), (n, w)).copy_from(&(-&self.ab));
            }
        }
        (big, nmat)
    }
}

/// Ranks found at one level of the derivative array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub mu: usize,
    pub r: usize,
    pub rank_m: usize,
    pub a: usize,
    pub rank_constraints: usize,
    pub d: usize,
    pub nu: usize,
    pub satisfied: bool,
}

/// Output of a successful analysis at level `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexData {
    pub mu: usize,
    pub r: usize,
    pub a: usize,
    pub d: usize,
    pub nu: usize,
    pub n: usize,
    pub m: usize,
    /// Left null basis of `M` (columns).
    pub z2: DMatrix<f64>,
    /// Right null basis of `Z2^T Nmat` (columns).
    pub t2: DMatrix<f64>,
    /// Column basis of `Eb T2`.
    pub z1: DMatrix<f64>,
    /// Orthonormal row basis of all algebraic constraints `Z2^T Nmat` on `v`.
    pub constraints: DMatrix<f64>,
    /// Explicit algebraic rows of the pencil that involve only `x`.
    pub explicit: DMatrix<f64>,
    /// Hidden constraints on `x` not implied by explicit rows (`A3 x = 0`).
    pub a3: DMatrix<f64>,
    /// Hidden constraints that involve the input and therefore are not in `A3`.
    pub input_coupled_hidden: usize,
}

impl IndexData {
    /// All constraints acting on `x` alone, explicit rows first.
    pub fn state_constraints(&self) -> DMatrix<f64> {
        let rows: Vec<_> = self.explicit.row_iter().chain(self.a3.row_iter()).collect();
        if rows.is_empty() {
            return DMatrix::zeros(0, self.n);
        }
        DMatrix::from_rows(&rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexAnalysis {
    pub levels: Vec<LevelReport>,
    pub data: Option<IndexData>,
}

impl IndexAnalysis {
    pub fn mu(&self) -> Option<usize> {
        self.data.as_ref().map(|d| d.mu)
    }
}

/// Basis (rows) of the part of `rowspace(rows)` whose last `m` entries vanish,
/// restricted to the first `n` entries.
fn x_only(rows: &DMatrix<f64>, n: usize, tol: f64, scale: f64) -> DMatrix<f64> {
    if rows.nrows() == 0 {
        return DMatrix::zeros(0, n);
    }
    let basis = linalg::row_basis_scaled(rows, tol, scale);
    let m = basis.ncols() - n;
    // orthonormal rows: the scale of the basis itself is one
    let coef = linalg::left_null_scaled(&basis.columns(n, m).into_owned(), tol, 1.0);
    let x = coef.transpose() * basis.columns(0, n);
    linalg::row_basis_scaled(&x, tol, 1.0)
}

/// Finds the smallest `mu <= mu_max` at which the rank conditions hold:
/// `r = rank [Nmat M]`, `a = r - rank M`, `rank(Z2^T Nmat) = a`,
/// `d = rank(Eb T2) = n - a - nu`, with `nu` the growth in corank.
///
/// Every rank decision uses the threshold `tol * s * max(rows, cols)` with
/// `s = max(||Eb||, ||Ab||)`, so products with orthonormal bases are judged
/// against the size of the pencil rather than their own round-off.
pub fn strangeness_analysis(p: &BehaviorPencil, mu_max: usize, tol: f64) -> IndexAnalysis {
    let n = p.n;
    let s = linalg::norm2(&p.eb).max(linalg::norm2(&p.ab));
    let mut levels = Vec::new();
    let mut prev_corank = 0usize;
    for mu in 0..=mu_max {
        let (big, nmat) = p.derivative_array(mu);
        let full = linalg::block(&[vec![&nmat, &big]]);
        let r = linalg::rank_scaled(&full, tol, s);
        let rank_m = linalg::rank_scaled(&big, tol, s);
        let a = r - rank_m;
        let z2 = linalg::left_null_scaled(&big, tol, s);
        let c = z2.transpose() * &nmat;
        let rank_constraints = linalg::rank_scaled(&c, tol, s);
        let t2 = linalg::right_null_scaled(&c, tol, s);
        let ebt2 = &p.eb * &t2;
        let d = linalg::rank_scaled(&ebt2, tol, s);
        let corank = (mu + 1) * n - r;
        let nu = corank.saturating_sub(prev_corank);
        prev_corank = corank;
        let satisfied = rank_constraints == a && a + nu <= n && d == n - a - nu;
        levels.push(LevelReport {
            mu,
            r,
            rank_m,
            a,
            rank_constraints,
            d,
            nu,
            satisfied,
        });
        if satisfied {
            let z1 = linalg::col_basis_scaled(&ebt2, tol, s);
            let constraints = linalg::row_basis_scaled(&c, tol, s);
            let z0 = linalg::left_null_scaled(&p.eb, tol, s);
            let explicit_rows = z0.transpose() * &p.ab;
            let a0 = linalg::rank_scaled(&explicit_rows, tol, s);
            let explicit = x_only(&explicit_rows, n, tol, s);
            let sx = x_only(&constraints, n, tol, 1.0);
            // part of the x-only constraints orthogonal to the explicit ones
            let proj = if explicit.nrows() > 0 {
                &sx - &sx * explicit.transpose() * &explicit
            } else {
                sx.clone()
            };
            let a3 = linalg::row_basis_scaled(&proj, tol, 1.0);
            let input_coupled_hidden = (a - a0.min(a)).saturating_sub(a3.nrows());
            return IndexAnalysis {
                levels,
                data: Some(IndexData {
                    mu,
                    r,
                    a,
                    d,
                    nu,
                    n,
                    m: p.m,
                    z2,
                    t2,
                    z1,
                    constraints,
                    explicit,
                    a3,
                    input_coupled_hidden,
                }),
            };
        }
    }
    IndexAnalysis { levels, data: None }
}

/// Default relative tolerance for the invertibility of `L22 Q22`.
pub const INDEX_ONE_TOL: f64 = 1e-10;

/// Tests differentiation index at most one on a uniform grid.
///
/// At each point `E = U~ diag(E11, 0) V~^T`; with `L = J - R` the block
/// `L22 Q22` of `U~^T L U~` and `U~^T Q V~` must be invertible when present.
pub fn check_index_le_one(sys: &PhdaeSystem, grid_points: usize, tol: f64) -> Result<bool> {
    let grid = if sys.is_constant() {
        vec![sys.interval().t0]
    } else {
        sys.grid(grid_points.max(2))
    };
    let n = sys.n();
    let mut first: Option<(usize, f64)> = None;
    let mut index_one = true;
    for &t in &grid {
        let c = sys.at(t);
        let svd = SquareSvd::new(&c.e);
        let rank = svd.rank(RANK_TOL);
        match first {
            None => first = Some((rank, t)),
            Some((r0, t0)) if r0 != rank => {
                return Err(PhdaeError::RankChange {
                    first: r0,
                    t_first: t0,
                    other: rank,
                    t_other: t,
                })
            }
            _ => {}
        }
        if rank == n {
            continue;
        }
        let k = n - rank;
        let u2 = svd.u.columns(rank, k);
        let v2 = svd.v.columns(rank, k);
        let l22 = u2.transpose() * (&c.j - &c.r) * u2;
        let q22 = u2.transpose() * &c.q * v2;
        let block = l22 * q22;
        let s = linalg::singular_values(&block);
        if s.last().copied().unwrap_or(0.0) <= tol * s[0] || s[0] == 0.0 {
            index_one = false;
        }
    }
    Ok(index_one)
}
