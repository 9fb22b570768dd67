//! The pHDAE system type
//!
//! ```text
//! E x' = [(J - R) Q - E K] x + (B - P) u
//! y    = (B + P)^T Q x + (S + N) u
//! ```
//!
//! and verification of its defining conditions on a time grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PhdaeError, Result};
use crate::linalg;
use crate::matfun::{self, MatFun};

/// Default number of uniform grid points used for pointwise checks.
pub const DEFAULT_GRID: usize = 33;
/// Default tolerance for structure verification.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub t0: f64,
    pub tf: f64,
}

impl Interval {
    pub fn new(t0: f64, tf: f64) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && t0 < tf) {
            return Err(PhdaeError::InvalidInterval { t0, tf });
        }
        Ok(Self { t0, tf })
    }

    pub fn unit() -> Self {
        Self { t0: 0.0, tf: 1.0 }
    }

    pub fn uniform(&self, points: usize) -> Vec<f64> {
        matfun::uniform(self.t0, self.tf, points)
    }

    pub fn chebyshev(&self, points: usize) -> Vec<f64> {
        matfun::chebyshev(self.t0, self.tf, points)
    }
}

/// The nine coefficients of a pHDAE, either as functions of time or as a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Coeffs<T> {
    pub e: T,
    pub q: T,
    pub j: T,
    pub r: T,
    pub k: T,
    pub b: T,
    pub p: T,
    pub s: T,
    pub n: T,
}

impl<T> Coeffs<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Coeffs<U> {
        Coeffs {
            e: f(&self.e),
            q: f(&self.q),
            j: f(&self.j),
            r: f(&self.r),
            k: f(&self.k),
            b: f(&self.b),
            p: f(&self.p),
            s: f(&self.s),
            n: f(&self.n),
        }
    }

    pub fn try_map<U>(&self, f: impl Fn(&T) -> Result<U>) -> Result<Coeffs<U>> {
        Ok(Coeffs {
            e: f(&self.e)?,
            q: f(&self.q)?,
            j: f(&self.j)?,
            r: f(&self.r)?,
            k: f(&self.k)?,
            b: f(&self.b)?,
            p: f(&self.p)?,
            s: f(&self.s)?,
            n: f(&self.n)?,
        })
    }

    /// `(name, value)` pairs in canonical order.
    pub fn named(&self) -> [(&'static str, &T); 9] {
        [
            ("E", &self.e),
            ("Q", &self.q),
            ("J", &self.j),
            ("R", &self.r),
            ("K", &self.k),
            ("B", &self.b),
            ("P", &self.p),
            ("S", &self.s),
            ("N", &self.n),
        ]
    }
}

/// Coefficients frozen at one time instant.
pub type Snapshot = Coeffs<DMatrix<f64>>;

impl Snapshot {
    /// Coefficients with `Q = I`, `K = 0`, and no ports, for `E x' = (J - R) x`.
    pub fn unported(e: DMatrix<f64>, j: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        let n = e.nrows();
        Self::with_ports(
            e,
            DMatrix::identity(n, n),
            j,
            r,
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, 0),
            DMatrix::zeros(n, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_ports(
        e: DMatrix<f64>,
        q: DMatrix<f64>,
        j: DMatrix<f64>,
        r: DMatrix<f64>,
        k: DMatrix<f64>,
        b: DMatrix<f64>,
        p: DMatrix<f64>,
        s: DMatrix<f64>,
        n: DMatrix<f64>,
    ) -> Self {
        Self { e, q, j, r, k, b, p, s, n }
    }

    /// State matrix `(J - R) Q - E K`.
    pub fn a(&self) -> DMatrix<f64> {
        (&self.j - &self.r) * &self.q - &self.e * &self.k
    }

    /// Input matrix `B - P`.
    pub fn input(&self) -> DMatrix<f64> {
        &self.b - &self.p
    }

    /// Output map `(B + P)^T Q`.
    pub fn output(&self) -> DMatrix<f64> {
        (&self.b + &self.p).transpose() * &self.q
    }

    /// Feedthrough `S + N`.
    pub fn feedthrough(&self) -> DMatrix<f64> {
        &self.s + &self.n
    }

    /// Symmetrized energy matrix `sym(Q^T E)`; `H(x) = 1/2 x^T (this) x`.
    pub fn energy(&self) -> DMatrix<f64> {
        linalg::sym(&(self.q.transpose() * &self.e))
    }

    pub fn w(&self) -> DMatrix<f64> {
        let qt = self.q.transpose();
        let top_left = &qt * &self.r * &self.q;
        let top_right = &qt * &self.p;
        let bottom_left = top_right.transpose();
        linalg::block(&[vec![&top_left, &top_right], vec![&bottom_left, &self.s]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhdaeSystem {
    n: usize,
    m: usize,
    interval: Interval,
    coeffs: Coeffs<MatFun>,
}

impl PhdaeSystem {
    /// Checks shapes and the interval; structure is verified separately.
    pub fn assemble(coeffs: Coeffs<MatFun>, n: usize, m: usize, interval: Interval) -> Result<Self> {
        Interval::new(interval.t0, interval.tf)?;
        let expected = [
            (n, n),
            (n, n),
            (n, n),
            (n, n),
            (n, n),
            (n, m),
            (n, m),
            (m, m),
            (m, m),
        ];
        for ((name, f), shape) in coeffs.named().into_iter().zip(expected) {
            if f.shape() != shape {
                return Err(PhdaeError::ShapeMismatch {
                    context: format!("coefficient {name}"),
                    expected: shape,
                    found: f.shape(),
                });
            }
        }
        Ok(Self { n, m, interval, coeffs })
    }

    /// Constant-coefficient system; `n` and `m` are read off `E` and `B`.
    pub fn constant(c: Snapshot, interval: Interval) -> Result<Self> {
        let (n, m) = (c.e.nrows(), c.b.ncols());
        Self::assemble(c.map(|x| MatFun::constant(x.clone())), n, m, interval)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn coeffs(&self) -> &Coeffs<MatFun> {
        &self.coeffs
    }

    pub fn with_interval(&self, interval: Interval) -> Result<Self> {
        Self::assemble(self.coeffs.clone(), self.n, self.m, interval)
    }

    pub fn at(&self, t: f64) -> Snapshot {
        self.coeffs.map(|f| f.eval(t))
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.named().iter().all(|(_, f)| f.is_constant())
    }

    /// Snapshot at `t0`, or `NotConstant` naming `what` if coefficients vary.
    pub fn constant_snapshot(&self, what: &str) -> Result<Snapshot> {
        if !self.is_constant() {
            return Err(PhdaeError::NotConstant(what.to_string()));
        }
        Ok(self.at(self.interval.t0))
    }

    pub fn grid(&self, points: usize) -> Vec<f64> {
        self.interval.uniform(points)
    }

    /// `H(x, t) = 1/2 x^T sym(Q^T E) x`.
    pub fn hamiltonian(&self, x: &DVector<f64>, t: f64) -> Result<f64> {
        self.check_state(x)?;
        let c = self.at(t);
        Ok(0.5 * x.dot(&(c.energy() * x)))
    }

    pub fn w_matrix(&self, t: f64) -> DMatrix<f64> {
        self.at(t).w()
    }

    /// Right-hand side `A x + (B - P) u` at `t`.
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        let c = self.at(t);
        c.a() * x + c.input() * u
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        let c = self.at(t);
        c.output() * x + c.feedthrough() * u
    }

    pub(crate) fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(PhdaeError::Dimension(format!(
                "state has length {}, system has n = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.m {
            return Err(PhdaeError::Dimension(format!(
                "input has length {}, system has m = {}",
                u.len(),
                self.m
            )));
        }
        Ok(())
    }

    /// Evaluates every defining condition on a uniform grid.
    pub fn verify_structure(&self, grid_points: usize, tol: f64) -> StructureReport {
        let grid = self.grid(grid_points.max(2));
        let c = &self.coeffs;
        let qte = &c.q.transpose() * &c.e;
        let dqte = qte.derivative();
        let ek_minus_jq = &(&c.e * &c.k) - &(&c.j * &c.q);

        let mut acc = Accumulator::default();
        for &t in &grid {
            let snap = self.at(t);
            let qte_t = qte.eval(t);
            let skew = (&qte_t - qte_t.transpose()).norm();
            acc.skew = acc.skew.max(skew);
            acc.skew_scale = acc.skew_scale.max(qte_t.norm());

            let m = ek_minus_jq.eval(t);
            let qt = snap.q.transpose();
            let rhs = &qt * &m + m.transpose() * &snap.q;
            let lhs = dqte.eval(t);
            acc.ident = acc.ident.max((&lhs - &rhs).norm());
            acc.ident_scale = acc
                .ident_scale
                .max(lhs.norm())
                .max((&qt * &snap.e).norm() * snap.k.norm())
                .max(snap.q.norm().powi(2) * snap.j.norm());

            let h = linalg::sym(&qte_t);
            let eig_h = linalg::min_sym_eig(&h);
            acc.min_h = acc.min_h.min(eig_h);
            acc.h_margin = acc.h_margin.min(eig_h + tol * (1.0 + linalg::norm2(&h)));

            let w = linalg::sym(&snap.w());
            let eig_w = linalg::min_sym_eig(&w);
            acc.min_w = acc.min_w.min(eig_w);
            acc.w_margin = acc.w_margin.min(eig_w + tol * (1.0 + linalg::norm2(&w)));
        }

        let skew_symmetry = acc.skew <= tol * (1.0 + acc.skew_scale);
        let derivative_identity = acc.ident <= tol * (1.0 + acc.ident_scale);
        let hamiltonian_psd = acc.h_margin >= 0.0;
        let dissipation_psd = acc.w_margin >= 0.0;
        StructureReport {
            skew_symmetry_residual: acc.skew,
            derivative_identity_residual: acc.ident,
            min_eig_qte: if acc.min_h.is_finite() { acc.min_h } else { 0.0 },
            min_eig_w: if acc.min_w.is_finite() { acc.min_w } else { 0.0 },
            skew_symmetry,
            derivative_identity,
            hamiltonian_psd,
            dissipation_psd,
            passed: skew_symmetry && derivative_identity && hamiltonian_psd && dissipation_psd,
            grid_points: grid.len(),
            tol,
        }
    }
}

struct Accumulator {
    skew: f64,
    skew_scale: f64,
    ident: f64,
    ident_scale: f64,
    min_h: f64,
    h_margin: f64,
    min_w: f64,
    w_margin: f64,
}

impl Accumulator {
    fn default() -> Self {
        Self {
            skew: 0.0,
            skew_scale: 0.0,
            ident: 0.0,
            ident_scale: 0.0,
            min_h: f64::INFINITY,
            h_margin: f64::INFINITY,
            min_w: f64::INFINITY,
            w_margin: f64::INFINITY,
        }
    }
}

/// Residuals and pass flags for the three defining conditions.
///
/// Residuals are maxima over the grid in the Frobenius norm. A residual passes
/// when it is at most `tol * (1 + scale)`, with `scale` the size of the terms
/// being compared; an eigenvalue passes when it is at least `-tol * (1 + ||M||_2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub skew_symmetry_residual: f64,
    pub derivative_identity_residual: f64,
    pub min_eig_qte: f64,
    pub min_eig_w: f64,
    pub skew_symmetry: bool,
    pub derivative_identity: bool,
    pub hamiltonian_psd: bool,
    pub dissipation_psd: bool,
    pub passed: bool,
    pub grid_points: usize,
    pub tol: f64,
}

impl StructureReport {
    /// Names of the conditions that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.skew_symmetry {
            out.push("skew_symmetry");
        }
        if !self.derivative_identity {
            out.push("derivative_identity");
        }
        if !self.hamiltonian_psd {
            out.push("hamiltonian_psd");
        }
        if !self.dissipation_psd {
            out.push("dissipation_psd");
        }
        out
    }
}
