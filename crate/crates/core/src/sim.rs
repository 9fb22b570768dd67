//! Fixed-step integration of index-one pHDAEs with an energy-balance audit.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PhdaeError, Result};
use crate::index::{check_index_le_one, INDEX_ONE_TOL};
use crate::linalg::{self, SquareSvd, RANK_TOL};
use crate::matfun::MatFun;
use crate::system::{PhdaeSystem, Snapshot, DEFAULT_GRID};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Differential rows at the midpoint, algebraic rows at the new time.
    #[default]
    ImplicitMidpoint,
    ImplicitEuler,
}

impl std::str::FromStr for Method {
    type Err = PhdaeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-midpoint" | "midpoint" => Ok(Self::ImplicitMidpoint),
            "implicit-euler" | "euler" => Ok(Self::ImplicitEuler),
            other => Err(PhdaeError::Invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Input signal `u(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Zero(usize),
    /// Polynomial `m x 1` matrix function.
    Polynomial(MatFun),
    /// Linear interpolation between samples, held constant outside them.
    Samples { times: Vec<f64>, values: Vec<DVector<f64>> },
}

impl Input {
    pub fn dim(&self) -> usize {
        match self {
            Input::Zero(m) => *m,
            Input::Polynomial(f) => f.rows(),
            Input::Samples { values, .. } => values.first().map_or(0, |v| v.len()),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Input::Zero(m) => DVector::zeros(*m),
            Input::Polynomial(f) => f.eval(t).column(0).into_owned(),
            Input::Samples { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    values[0].clone()
                } else if k == times.len() {
                    values[k - 1].clone()
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let w = (t - t0) / (t1 - t0);
                    &values[k - 1] * (1.0 - w) + &values[k] * w
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Input::Polynomial(f) if f.cols() != 1 => Err(PhdaeError::Invalid("polynomial input must be a column".into())),
            Input::Samples { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(PhdaeError::Invalid("sampled input needs matching, nonempty times and values".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(PhdaeError::Invalid("sample times must increase strictly".into()));
                }
                if values.iter().any(|v| v.len() != values[0].len()) {
                    return Err(PhdaeError::Invalid("samples differ in length".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub method: Method,
    /// Move an inconsistent `x0` onto the algebraic constraints instead of failing.
    pub project: bool,
    /// Relative tolerance of the consistency test at `t0`.
    pub consistency_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            method: Method::ImplicitMidpoint,
            project: false,
            consistency_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub hamiltonian: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    /// CSV with header `t, x1..xn, y1..ym, u1..um, H`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| PhdaeError::Invalid(format!("writing CSV: {e}"));
        let mut out = csv::Writer::from_writer(w);
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("y{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("H".into());
        out.write_record(&header).map_err(io)?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(f64::to_string));
            row.extend(self.outputs[k].iter().map(f64::to_string));
            row.extend(self.inputs[k].iter().map(f64::to_string));
            row.push(self.hamiltonian[k].to_string());
            out.write_record(&row).map_err(io)?;
        }
        out.flush().map_err(|e| PhdaeError::Invalid(format!("writing CSV: {e}")))
    }
}

/// Range and left-kernel bases of `E`.
fn split_rows(e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let svd = SquareSvd::new(e);
    let r = svd.rank(RANK_TOL);
    let n = e.nrows();
    (svd.u.columns(0, r).into_owned(), svd.u.columns(r, n - r).into_owned())
}

/// `||Z2^T (A x + (B - P) u)||` with `Z2` spanning the left kernel of `E(t)`.
pub fn algebraic_residual(sys: &PhdaeSystem, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> f64 {
    let c = sys.at(t);
    let (_, z2) = split_rows(&c.e);
    (z2.transpose() * (c.a() * x + c.input() * u)).norm()
}

fn consistency_scale(c: &Snapshot, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
    1.0 + linalg::norm2(&c.a()) * x.norm() + linalg::norm2(&c.input()) * u.norm()
}

/// Least-squares correction of `x` along the kernel of `E(t)` so that the
/// algebraic equations hold.
pub fn project_consistent(sys: &PhdaeSystem, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let c = sys.at(t);
    let (_, z2) = split_rows(&c.e);
    if z2.ncols() == 0 {
        return Ok(x.clone());
    }
    let kernel = linalg::right_null(&c.e, RANK_TOL);
    let g = z2.transpose() * c.a() * &kernel;
    let res = z2.transpose() * (c.a() * x + c.input() * u);
    let delta = linalg::lstsq(&g, &DMatrix::from_column_slice(res.len(), 1, res.as_slice()), RANK_TOL);
    Ok(x - kernel * delta.column(0))
}

/// Integrates `sys` on `grid` starting from `x0`.
pub fn integrate(sys: &PhdaeSystem, input: &Input, x0: &DVector<f64>, grid: &[f64], opts: SimOptions) -> Result<Trajectory> {
    sys.check_state(x0)?;
    input.validate()?;
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PhdaeError::Invalid("grid needs at least two strictly increasing times".into()));
    }
    if !check_index_le_one(sys, DEFAULT_GRID, INDEX_ONE_TOL)? {
        return Err(PhdaeError::HighIndex);
    }
    let t0 = grid[0];
    let u0 = input.eval(t0);
    sys.check_input(&u0)?;
    let c0 = sys.at(t0);
    let res0 = algebraic_residual(sys, x0, &u0, t0);
    let tol0 = opts.consistency_tol * consistency_scale(&c0, x0, &u0);
    let x0 = if res0 > tol0 {
        if !opts.project {
            return Err(PhdaeError::Inconsistent { residual: res0, tol: tol0 });
        }
        project_consistent(sys, x0, &u0, t0)?
    } else {
        x0.clone()
    };

    let constant = sys.is_constant();
    let frozen = constant.then(|| (c0.clone(), split_rows(&c0.e)));
    let at = |t: f64| -> (Snapshot, (DMatrix<f64>, DMatrix<f64>)) {
        match &frozen {
            Some(f) => f.clone(),
            None => {
                let c = sys.at(t);
                let z = split_rows(&c.e);
                (c, z)
            }
        }
    };

    let mut states = vec![x0];
    let mut inputs = vec![u0];
    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let h = tb - ta;
        let xa = states.last().unwrap().clone();
        let ub = input.eval(tb);
        let (lhs, rhs) = match opts.method {
            Method::ImplicitEuler => {
                let (c, _) = at(tb);
                let lhs = &c.e / h - c.a();
                let rhs = &c.e * &xa / h + c.input() * &ub;
                (lhs, rhs)
            }
            Method::ImplicitMidpoint => {
                let tm = 0.5 * (ta + tb);
                let um = input.eval(tm);
                let (cm, (z1, _)) = at(tm);
                let (cb, (_, z2)) = at(tb);
                let am = cm.a();
                let z1t = z1.transpose();
                let z2t = z2.transpose();
                let top = &z1t * (&cm.e / h - &am * 0.5);
                let bottom = &z2t * cb.a();
                let lhs = linalg::block(&[vec![&top], vec![&bottom]]);
                let rt = &z1t * ((&cm.e / h + &am * 0.5) * &xa + cm.input() * &um);
                let rb = -(&z2t * (cb.input() * &ub));
                let rhs = DVector::from_iterator(rt.len() + rb.len(), rt.iter().chain(rb.iter()).cloned());
                (lhs, rhs)
            }
        };
        let sol = linalg::solve(&lhs, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), "stage matrix")
            .map_err(|e| match e {
                PhdaeError::Singular { what, sigma_min, .. } => PhdaeError::Singular {
                    what,
                    sigma_min,
                    at: format!(" at t={tb}"),
                },
                other => other,
            })?;
        states.push(sol.column(0).into_owned());
        inputs.push(ub);
    }
    let outputs = grid
        .iter()
        .zip(states.iter().zip(&inputs))
        .map(|(&t, (x, u))| sys.output(x, u, t))
        .collect();
    let hamiltonian = grid
        .iter()
        .zip(&states)
        .map(|(&t, x)| sys.hamiltonian(x, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        outputs,
        inputs,
        hamiltonian,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Per step `(H_{k+1} - H_k)/h - (s_k + s_{k+1})/2` with `s = u^T y - z^T W z`.
    pub balance_residuals: Vec<f64>,
    pub max_balance_residual: f64,
    /// Trapezoidal `int u^T y dt`.
    pub cumulative_supply: f64,
    pub hamiltonian_change: f64,
    /// `cumulative_supply - hamiltonian_change`.
    pub dissipation_margin: f64,
    pub tol: f64,
    pub violated: bool,
}

/// Audits the energy balance `dH/dt = u^T y - z^T W z` along a trajectory.
pub fn energy_audit(traj: &Trajectory, sys: &PhdaeSystem) -> EnergyReport {
    let n = traj.len();
    let supply: Vec<f64> = traj.inputs.iter().zip(&traj.outputs).map(|(u, y)| u.dot(y)).collect();
    let net: Vec<f64> = (0..n)
        .map(|k| {
            let z = DVector::from_iterator(
                traj.states[k].len() + traj.inputs[k].len(),
                traj.states[k].iter().chain(traj.inputs[k].iter()).cloned(),
            );
            supply[k] - z.dot(&(sys.w_matrix(traj.times[k]) * &z))
        })
        .collect();
    let mut balance_residuals = Vec::with_capacity(n.saturating_sub(1));
    let mut cumulative_supply = 0.0;
    for k in 0..n.saturating_sub(1) {
        let h = traj.times[k + 1] - traj.times[k];
        let dh = traj.hamiltonian[k + 1] - traj.hamiltonian[k];
        balance_residuals.push(dh / h - 0.5 * (net[k] + net[k + 1]));
        cumulative_supply += 0.5 * h * (supply[k] + supply[k + 1]);
    }
    let h0 = traj.hamiltonian.first().copied().unwrap_or(0.0);
    let hamiltonian_change = traj.hamiltonian.last().copied().unwrap_or(0.0) - h0;
    let dissipation_margin = cumulative_supply - hamiltonian_change;
    let tol = 1e-8 * (1.0 + h0.abs());
    EnergyReport {
        max_balance_residual: balance_residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
        balance_residuals,
        cumulative_supply,
        hamiltonian_change,
        dissipation_margin,
        tol,
        violated: dissipation_margin < -tol,
    }
}

/// Second-order finite differences on a possibly nonuniform grid, one-sided at
/// the ends; exact for quadratics.
pub fn derivative_samples(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || values.len() != n {
        return Err(PhdaeError::Invalid("derivative reconstruction needs at least three samples".into()));
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h1, h2) = (times[i] - times[i - 1], times[i + 1] - times[i]);
        d[i] = -h2 / (h1 * (h1 + h2)) * values[i - 1] + (h2 - h1) / (h1 * h2) * values[i] + h1 / (h2 * (h1 + h2)) * values[i + 1];
    }
    let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * values[0] + (h1 + h2) / (h1 * h2) * values[1] - h1 / (h2 * (h1 + h2)) * values[2];
    let (h1, h2) = (times[n - 2] - times[n - 3], times[n - 1] - times[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * values[n - 3] - (h1 + h2) / (h1 * h2) * values[n - 2] + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * values[n - 1];
    Ok(d)
}

/// Time derivative of one state component.
pub fn reconstruct_derivative(traj: &Trajectory, component: usize) -> Result<Vec<f64>> {
    if traj.states.first().is_none_or(|x| component >= x.len()) {
        return Err(PhdaeError::Invalid(format!("no state component {component}")));
    }
    derivative_samples(&traj.times, &traj.component(component))
}
