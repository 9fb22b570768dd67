use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::document::{to_rows, ReductionSummary};
use crate::error::{PhdaeError, Result};
use crate::index::{check_index_le_one, strangeness_analysis, BehaviorPencil, INDEX_ONE_TOL};
use crate::system::{PhdaeSystem, DEFAULT_GRID};

use super::canonical::{index_one_canonical, reduce_index_one, ReducedSystem};
use super::regularize::{regularize_high_index, Regularized};

/// A constant-coefficient pHDAE taken all the way to an implicit pH ODE:
/// regularized first when its index exceeds one, then reduced.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub regularized: Option<Regularized>,
    /// Reduction of the original system, or of the regularized subsystem.
    pub reduced: ReducedSystem,
    /// Original states are `x = lift_state xr + lift_input u`.
    pub lift_state: DMatrix<f64>,
    pub lift_input: DMatrix<f64>,
}

impl Reduction {
    pub fn ode(&self) -> &PhdaeSystem {
        &self.reduced.ode
    }

    /// The index-one system that was reduced.
    pub fn index_one_system(&self) -> Option<&PhdaeSystem> {
        self.regularized.as_ref().map(|r| &r.subsystem)
    }

    pub fn lift(&self, xr: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.lift_state * xr + &self.lift_input * u
    }

    pub fn restrict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.regularized {
            Some(reg) => self.reduced.restrict(&reg.restrict(x)?),
            None => self.reduced.restrict(x),
        }
    }

    /// Largest violation of the constraints: distance from the regularized
    /// manifold `x3 = 0`, then the algebraic equations with input `u`.
    pub fn consistency_residual(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        match &self.regularized {
            Some(reg) => {
                let xs = reg.restrict(x)?;
                let off = (x - reg.lift(&xs)).norm();
                let alg = self.reduced.canonical.constraint_residual(&xs, u)?;
                Ok(off.max(alg))
            }
            None => self.reduced.canonical.constraint_residual(x, u),
        }
    }

    pub fn summary(&self) -> ReductionSummary {
        let c = &self.reduced.canonical;
        let mut blocks = BTreeMap::new();
        let mut residuals = BTreeMap::new();
        let mut condition_numbers = BTreeMap::new();
        let mut maps = BTreeMap::new();
        maps.insert("lift_state".into(), to_rows(&self.lift_state));
        maps.insert("lift_input".into(), to_rows(&self.lift_input));
        let kind = match &self.regularized {
            Some(reg) => {
                blocks.insert("hidden_constraints".into(), reg.a3);
                blocks.insert("regularized_size".into(), reg.subsystem_size());
                residuals.insert("selection".into(), reg.selection_residual);
                condition_numbers.insert("A33".into(), reg.cond_a33);
                maps.insert("constraints".into(), to_rows(&reg.constraints));
                "regularized"
            }
            None => "index-one",
        };
        blocks.insert("n".into(), self.lift_state.nrows());
        blocks.insert("n1".into(), c.n1);
        blocks.insert("n2".into(), c.n2);
        residuals.insert("coupling".into(), c.coupling_residual);
        residuals.insert("q_offdiag".into(), c.q_offdiag);
        residuals.insert("w".into(), self.reduced.w_residual());
        if c.n2 > 0 {
            condition_numbers.insert("L22".into(), c.cond_l22);
            condition_numbers.insert("Q22".into(), c.cond_q22);
        }
        residuals.retain(|_, v| v.is_finite());
        condition_numbers.retain(|_, v| v.is_finite());
        ReductionSummary {
            kind: kind.into(),
            blocks,
            residuals,
            condition_numbers,
            maps,
        }
    }
}

/// Regularizes (via the free-response hidden constraints) when needed, then
/// reduces to an implicit port-Hamiltonian ODE.
pub fn reduce_to_ode(sys: &PhdaeSystem, mu_max: usize, tol: f64) -> Result<Reduction> {
    if check_index_le_one(sys, DEFAULT_GRID, INDEX_ONE_TOL)? {
        let reduced = reduce_index_one(&index_one_canonical(sys, tol)?)?;
        let (lift_state, lift_input) = lift_maps(&reduced);
        return Ok(Reduction {
            regularized: None,
            reduced,
            lift_state,
            lift_input,
        });
    }
    let pencil = BehaviorPencil::from_system(sys)?.free_response();
    let analysis = strangeness_analysis(&pencil, mu_max, tol);
    let idx = analysis.data.ok_or_else(|| PhdaeError::RankAssumption {
        what: "derivative array".into(),
        detail: format!("no level up to mu = {mu_max} satisfies the rank conditions"),
        singular_values: vec![],
    })?;
    let reg = regularize_high_index(sys, &idx, tol)?;
    if !check_index_le_one(&reg.subsystem, DEFAULT_GRID, INDEX_ONE_TOL)? {
        return Err(PhdaeError::HighIndex);
    }
    let reduced = reduce_index_one(&index_one_canonical(&reg.subsystem, tol)?)?;
    let (ls, li) = lift_maps(&reduced);
    let vs = reg.v.columns(0, reg.subsystem_size()).into_owned();
    Ok(Reduction {
        lift_state: &vs * ls,
        lift_input: &vs * li,
        regularized: Some(reg),
        reduced,
    })
}

fn lift_maps(red: &ReducedSystem) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = &red.canonical;
    let v1 = c.v.columns(0, c.n1);
    let v2 = c.v.columns(c.n1, c.n2);
    (v1 + v2 * &red.g, v2 * &red.h)
}
