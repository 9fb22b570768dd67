//! Browser bindings: structure verification, index analysis and a simulated
//! energy balance for the built-in presets. Every function returns JSON text.

use nalgebra::{DMatrix, DVector};
use phdae_core::document::IndexSummary;
use phdae_core::index::{strangeness_analysis, BehaviorPencil};
use phdae_core::linalg::RANK_TOL;
use phdae_core::reduce::reduce_to_ode;
use phdae_core::sim::{energy_audit, integrate, Input, SimOptions};
use phdae_core::system::{DEFAULT_GRID, DEFAULT_TOL};
use phdae_core::{models, MatFun, PhdaeSystem};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MU_MAX: usize = 3;

fn preset(name: &str) -> Result<PhdaeSystem, String> {
    models::preset(name).ok_or_else(|| format!("unknown preset `{name}`"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PresetInfo {
    name: &'static str,
    n: usize,
    m: usize,
}

#[derive(Serialize)]
pub struct SimulationSummary {
    pub system_size: usize,
    pub regularized: bool,
    pub times: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub cumulative_supply: f64,
    pub hamiltonian_change: f64,
    pub dissipation_margin: f64,
    pub max_balance_residual: f64,
    pub violated: bool,
}

/// Names and sizes of the presets.
#[wasm_bindgen]
pub fn presets() -> String {
    let list: Vec<PresetInfo> = models::PRESET_NAMES
        .iter()
        .filter_map(|&name| models::preset(name).map(|s| PresetInfo { name, n: s.n(), m: s.m() }))
        .collect();
    serde_json::to_string(&list).unwrap_or_else(|_| "[]".into())
}

pub fn verify_json(name: &str) -> Result<String, String> {
    to_json(&preset(name)?.verify_structure(DEFAULT_GRID, DEFAULT_TOL))
}

pub fn analyze_json(name: &str) -> Result<String, String> {
    let pencil = BehaviorPencil::from_system(&preset(name)?).map_err(|e| e.to_string())?.free_response();
    to_json(&IndexSummary::new(&strangeness_analysis(&pencil, MU_MAX, RANK_TOL), MU_MAX))
}

/// Simulates the index-one form of a preset under the constant input
/// `u = amplitude` from a projected seed state and audits the energy balance.
pub fn simulate_summary(name: &str, amplitude: f64, tf: f64, steps: usize) -> Result<SimulationSummary, String> {
    if !(tf.is_finite() && tf > 0.0) || steps == 0 || steps > 100_000 || !amplitude.is_finite() {
        return Err("need tf > 0, 1 <= steps <= 100000 and a finite amplitude".into());
    }
    let sys = preset(name)?;
    let red = reduce_to_ode(&sys, MU_MAX, RANK_TOL).map_err(|e| e.to_string())?;
    let s = red.index_one_system().unwrap_or(&sys);
    let t0 = s.interval().t0;
    let grid: Vec<f64> = (0..=steps).map(|k| t0 + tf * k as f64 / steps as f64).collect();
    let input = Input::Polynomial(MatFun::constant(DMatrix::from_element(s.m(), 1, amplitude)));
    let seed = DVector::from_fn(s.n(), |i, _| 1.0 / (1.0 + i as f64));
    let opts = SimOptions { project: true, ..Default::default() };
    let traj = integrate(s, &input, &seed, &grid, opts).map_err(|e| e.to_string())?;
    let audit = energy_audit(&traj, s);
    Ok(SimulationSummary {
        system_size: s.n(),
        regularized: red.regularized.is_some(),
        times: traj.times,
        hamiltonian: traj.hamiltonian,
        cumulative_supply: audit.cumulative_supply,
        hamiltonian_change: audit.hamiltonian_change,
        dissipation_margin: audit.dissipation_margin,
        max_balance_residual: audit.max_balance_residual,
        violated: audit.violated,
    })
}

/// Structure report of a preset.
#[wasm_bindgen]
pub fn verify(name: &str) -> Result<String, JsError> {
    verify_json(name).map_err(|e| JsError::new(&e))
}

/// Free-response index analysis of a preset.
#[wasm_bindgen]
pub fn analyze(name: &str) -> Result<String, JsError> {
    analyze_json(name).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(name: &str, amplitude: f64, tf: f64, steps: usize) -> Result<String, JsError> {
    simulate_summary(name, amplitude, tf, steps)
        .and_then(|s| to_json(&s))
        .map_err(|e| JsError::new(&e))
}
