//! Structure-preserving changes of variables.
//!
//! With `x = V x~` and the equation scaled by `U^T`, the coefficients become
//! `E~ = U^T E V`, `Q~ = U^{-1} Q V`, `J~ = U^T J U`, `R~ = U^T R U`,
//! `B~ = U^T B`, `P~ = U^T P` and `K~ = V^{-1} K V + V^{-1} V'`; the Hamiltonian
//! is unchanged, `H~(x~) = H(V x~)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PhdaeError, Result};
use crate::linalg::{self, RANK_TOL};
use crate::matfun::MatFun;
use crate::system::{Coeffs, PhdaeSystem, Snapshot, DEFAULT_GRID};

#[derive(Clone, Debug, PartialEq)]
pub struct TransformPair {
    pub u: MatFun,
    pub v: MatFun,
}

impl TransformPair {
    pub fn new(u: MatFun, v: MatFun) -> Result<Self> {
        for (name, f) in [("U", &u), ("V", &v)] {
            if f.rows() != f.cols() {
                return Err(PhdaeError::ShapeMismatch {
                    context: format!("transform {name}"),
                    expected: (f.rows(), f.rows()),
                    found: f.shape(),
                });
            }
        }
        if u.rows() != v.rows() {
            return Err(PhdaeError::ShapeMismatch {
                context: "transform pair".into(),
                expected: u.shape(),
                found: v.shape(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn constant(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        Self::new(MatFun::constant(u), MatFun::constant(v))
    }
}

/// Controls for the pointwise re-fit of inverse-bearing coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub max_degree: usize,
    pub tol: f64,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_degree: 12,
            tol: 1e-10,
            grid_points: DEFAULT_GRID,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    /// True when every transformed coefficient is an exact polynomial.
    pub exact: bool,
    /// Largest re-fit residual (zero on the exact path).
    pub fit_residual: f64,
    pub max_cond_u: f64,
    pub max_cond_v: f64,
}

/// Applies `(U, V)` to a snapshot with `V' = 0`.
pub fn congruence_snapshot(c: &Snapshot, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Snapshot> {
    let ut = u.transpose();
    Ok(Coeffs {
        e: &ut * &c.e * v,
        q: linalg::solve(u, &(&c.q * v), "U")?,
        j: &ut * &c.j * u,
        r: &ut * &c.r * u,
        k: linalg::solve(v, &(&c.k * v), "V")?,
        b: &ut * &c.b,
        p: &ut * &c.p,
        s: c.s.clone(),
        n: c.n.clone(),
    })
}

fn check_invertible(f: &MatFun, name: &str, grid: &[f64]) -> Result<f64> {
    let mut worst = 1.0f64;
    for &t in grid {
        let m = f.eval(t);
        let s = linalg::singular_values(&m);
        let (hi, lo) = (s[0], *s.last().unwrap());
        if lo <= RANK_TOL * hi * m.nrows() as f64 || hi == 0.0 {
            return Err(PhdaeError::Singular {
                what: name.to_string(),
                sigma_min: lo,
                at: format!(" at t={t}"),
            });
        }
        worst = worst.max(hi / lo);
    }
    Ok(worst)
}

/// Transforms `sys` by `tp`.
///
/// `U^{-1} Q V` and `V^{-1}(K V + V')` are exact when `U` (resp. `V`) is
/// constant; otherwise they are sampled at Chebyshev nodes and re-fit.
pub fn congruence(sys: &PhdaeSystem, tp: &TransformPair, opts: FitOptions) -> Result<(PhdaeSystem, TransformReport)> {
    let n = sys.n();
    if tp.u.rows() != n {
        return Err(PhdaeError::ShapeMismatch {
            context: "transform pair".into(),
            expected: (n, n),
            found: tp.u.shape(),
        });
    }
    let iv = sys.interval();
    let grid = iv.uniform(opts.grid_points.max(2));
    let max_cond_u = check_invertible(&tp.u, "U", &grid)?;
    let max_cond_v = check_invertible(&tp.v, "V", &grid)?;

    let c = sys.coeffs();
    let (u, v) = (&tp.u, &tp.v);
    let ut = u.transpose();
    let mut exact = true;
    let mut fit_residual = 0.0f64;

    let mut refit = |what: &str, f: &dyn Fn(f64) -> Result<DMatrix<f64>>| -> Result<MatFun> {
        let (fit, resid) = MatFun::fit_fn(f, iv.t0, iv.tf, opts.max_degree, opts.tol)?;
        let scale = iv
            .uniform(opts.grid_points.max(2))
            .iter()
            .map(|&t| f(t).map(|m| m.norm()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if resid > opts.tol * (1.0 + scale) {
            return Err(PhdaeError::FitResidual {
                what: what.to_string(),
                residual: resid,
                tol: opts.tol * (1.0 + scale),
            });
        }
        exact = false;
        fit_residual = fit_residual.max(resid);
        Ok(fit)
    };

    let q = if u.is_constant() {
        let uinv = linalg::solve(&u.eval(iv.t0), &DMatrix::identity(n, n), "U")?;
        (&c.q * v).premul(&uinv)
    } else {
        refit("U^-1 Q V", &|t| linalg::solve(&u.eval(t), &(c.q.eval(t) * v.eval(t)), "U"))?
    };
    let k = if v.is_constant() {
        let vinv = linalg::solve(&v.eval(iv.t0), &DMatrix::identity(n, n), "V")?;
        (&c.k * v).premul(&vinv)
    } else {
        let vd = v.derivative();
        refit("V^-1 (K V + V')", &|t| {
            let vt = v.eval(t);
            linalg::solve(&vt, &(c.k.eval(t) * &vt + vd.eval(t)), "V")
        })?
    };

    let coeffs = Coeffs {
        e: &(&ut * &c.e) * v,
        q,
        j: &(&ut * &c.j) * u,
        r: &(&ut * &c.r) * u,
        k,
        b: &ut * &c.b,
        p: &ut * &c.p,
        s: c.s.clone(),
        n: c.n.clone(),
    };
    let out = PhdaeSystem::assemble(coeffs, n, sys.m(), iv)?;
    Ok((
        out,
        TransformReport {
            exact,
            fit_residual,
            max_cond_u,
            max_cond_v,
        },
    ))
}

/// Result of removing `K` by the substitution `x = V_K x~` with `V_K' = V_K K`.
#[derive(Clone, Debug)]
pub struct KElimination {
    pub times: Vec<f64>,
    /// `V_K` at each sample time.
    pub v: Vec<DMatrix<f64>>,
    /// New `E = E~ V_K^{-1}` at each sample time.
    pub e: Vec<DMatrix<f64>>,
    /// New `Q = Q~ V_K^{-1}` at each sample time.
    pub q: Vec<DMatrix<f64>>,
    /// Largest `|| V^T (Q^T E) V - Q~^T E~ ||` over samples, relative to `|| Q~^T E~ ||`.
    pub hamiltonian_residual: f64,
    /// Largest central-difference residual of the skew-adjointness identity with `K = 0`.
    pub structure_residual: f64,
}

/// Solves `V' = V K` on the system interval with classical RK4 and moves `V`
/// into `E` and `Q`, leaving `K = 0`.
pub fn eliminate_k(sys: &PhdaeSystem, steps: usize) -> Result<KElimination> {
    if steps < 2 {
        return Err(PhdaeError::Invalid("eliminate_k needs at least 2 steps".into()));
    }
    let iv = sys.interval();
    let n = sys.n();
    let c = sys.coeffs();
    let h = (iv.tf - iv.t0) / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| iv.t0 + h * i as f64).collect();

    let mut vs = Vec::with_capacity(steps + 1);
    let mut v = DMatrix::<f64>::identity(n, n);
    vs.push(v.clone());
    for &t in &times[..steps] {
        let k_at = |s: f64| c.k.eval(s);
        let (k0, kh, k1) = (k_at(t), k_at(t + 0.5 * h), k_at(t + h));
        let s1 = &v * &k0;
        let s2 = (&v + &s1 * (0.5 * h)) * &kh;
        let s3 = (&v + &s2 * (0.5 * h)) * &kh;
        let s4 = (&v + &s3 * h) * &k1;
        v += (s1 + s2 * 2.0 + s3 * 2.0 + s4) * (h / 6.0);
        vs.push(v.clone());
    }

    let mut es = Vec::with_capacity(vs.len());
    let mut qs = Vec::with_capacity(vs.len());
    let mut hamiltonian_residual = 0.0f64;
    for (&t, vk) in times.iter().zip(&vs) {
        let smin = linalg::sigma_min(vk);
        if smin <= RANK_TOL * linalg::norm2(vk) * n as f64 {
            return Err(PhdaeError::Singular {
                what: "V_K".into(),
                sigma_min: smin,
                at: format!(" at t={t}"),
            });
        }
        let vt = vk.transpose();
        let e_new = linalg::solve(&vt, &c.e.eval(t).transpose(), "V_K")?.transpose();
        let q_new = linalg::solve(&vt, &c.q.eval(t).transpose(), "V_K")?.transpose();
        let old = c.q.eval(t).transpose() * c.e.eval(t);
        let back = &vt * q_new.transpose() * &e_new * vk;
        hamiltonian_residual = hamiltonian_residual.max((back - &old).norm() / (1.0 + old.norm()));
        es.push(e_new);
        qs.push(q_new);
    }

    let mut structure_residual = 0.0f64;
    for i in 1..steps {
        let qte = |k: usize| qs[k].transpose() * &es[k];
        let d = (qte(i + 1) - qte(i - 1)) / (2.0 * h);
        let jq = c.j.eval(times[i]) * &qs[i];
        let rhs = -(qs[i].transpose() * &jq) - jq.transpose() * &qs[i];
        structure_residual = structure_residual.max((d - rhs).norm());
    }

    Ok(KElimination {
        times,
        v: vs,
        e: es,
        q: qs,
        hamiltonian_residual,
        structure_residual,
    })
}

/// Largest `||E - E^T|| + ||E' + A + A^T||` over the grid.
pub fn skew_adjoint_residual(e: &MatFun, a: &MatFun, grid: &[f64]) -> f64 {
    let ed = e.derivative();
    grid.iter()
        .map(|&t| {
            let et = e.eval(t);
            let at = a.eval(t);
            (&et - et.transpose()).norm() + (ed.eval(t) + &at + at.transpose()).norm()
        })
        .fold(0.0, f64::max)
}

/// The skew-adjoint operator pair `(Q^T E, Q^T J Q - Q^T E K)` of a pHDAE.
pub fn operator_pair(sys: &PhdaeSystem) -> (MatFun, MatFun) {
    let c = sys.coeffs();
    let qt = c.q.transpose();
    let e = &qt * &c.e;
    let a = &(&(&qt * &c.j) * &c.q) - &(&e * &c.k);
    (e, a)
}

/// Compresses a skew-adjoint pair `(E, A)` by a possibly rectangular `V`:
/// returns `(V^T E V, V^T A V - V^T E V')`.
pub fn compress_operator(
    e: &MatFun,
    a: &MatFun,
    v: &MatFun,
    grid: &[f64],
    tol: f64,
) -> Result<(MatFun, MatFun)> {
    if e.shape() != a.shape() || e.rows() != e.cols() || v.rows() != e.rows() {
        return Err(PhdaeError::ShapeMismatch {
            context: "compress_operator".into(),
            expected: e.shape(),
            found: v.shape(),
        });
    }
    let scale = grid
        .iter()
        .map(|&t| e.eval(t).norm() + a.eval(t).norm())
        .fold(0.0, f64::max);
    let residual = skew_adjoint_residual(e, a, grid);
    if residual > tol * (1.0 + scale) {
        return Err(PhdaeError::NotSkewAdjoint { residual });
    }
    let vt = v.transpose();
    let ev = e * v;
    let e_new = &vt * &ev;
    let a_new = &(&(&vt * a) * v) - &(&vt * &(e * &v.derivative()));
    Ok((e_new, a_new))
}
