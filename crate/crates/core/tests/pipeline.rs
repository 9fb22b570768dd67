use nalgebra::{DMatrix, DVector};
use phdae_core::document::SystemDocument;
use phdae_core::linalg::RANK_TOL;
use phdae_core::reduce::reduce_to_ode;
use phdae_core::sim::{energy_audit, integrate, Input, SimOptions};
use phdae_core::system::{DEFAULT_GRID, DEFAULT_TOL};
use phdae_core::{models, MatFun};

fn grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

#[test]
fn documents_survive_the_whole_pipeline() {
    for name in models::PRESET_NAMES {
        let text = SystemDocument::from_system(&models::preset(name).unwrap()).to_json();
        let sys = SystemDocument::parse(&text).unwrap().system().unwrap();
        assert!(sys.verify_structure(DEFAULT_GRID, DEFAULT_TOL).passed, "{name}");
        let red = reduce_to_ode(&sys, 3, RANK_TOL).unwrap();
        let ode_doc = SystemDocument::from_system(red.ode()).to_json();
        let ode = SystemDocument::parse(&ode_doc).unwrap().system().unwrap();
        assert!(ode.verify_structure(DEFAULT_GRID, DEFAULT_TOL).passed, "{name}");
    }
}

#[test]
fn lifted_reduced_trajectory_solves_the_original_system() {
    let sys = models::preset("gas").unwrap();
    let red = reduce_to_ode(&sys, 3, RANK_TOL).unwrap();
    let m = sys.m();
    let input = Input::Polynomial(MatFun::new(vec![DMatrix::from_element(m, 1, 0.2), DMatrix::from_element(m, 1, 0.4)]).unwrap());
    let xr0 = DVector::from_fn(red.ode().n(), |i, _| 0.3 - 0.1 * i as f64);
    let g = grid(400);
    let reduced = integrate(red.ode(), &input, &xr0, &g, SimOptions::default()).unwrap();

    let full_sys = red.index_one_system().unwrap();
    let x0 = red.lift(&xr0, &input.eval(0.0));
    let seed = red.regularized.as_ref().unwrap().restrict(&x0).unwrap();
    let full = integrate(full_sys, &input, &seed, &g, SimOptions::default()).unwrap();
    for (k, xs) in full.states.iter().enumerate() {
        let x = red.regularized.as_ref().unwrap().lift(xs);
        let gap = (red.restrict(&x).unwrap() - &reduced.states[k]).amax();
        assert!(gap < 1e-6, "step {k}: {gap:e}");
        assert!(red.consistency_residual(&x, &input.eval(g[k])).unwrap() < 1e-9);
    }
    assert!(!energy_audit(&full, full_sys).violated);
    assert!(!energy_audit(&reduced, red.ode()).violated);
}
