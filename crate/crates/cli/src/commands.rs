use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use phdae_core::document::{ConsistencySummary, IndexSummary, Provenance, ReportDocument, SystemDocument};
use phdae_core::index::{strangeness_analysis, BehaviorPencil, IndexAnalysis};
use phdae_core::linalg::RANK_TOL;
use phdae_core::reduce::{reduce_to_ode, Reduction};
use phdae_core::sim::{energy_audit, integrate, EnergyReport, Input, Method, SimOptions, Trajectory};
use phdae_core::system::{StructureReport, DEFAULT_GRID, DEFAULT_TOL};
use phdae_core::{models, MatFun, PhdaeError, PhdaeSystem};

const TOOL: &str = "phdae";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type CmdResult = Result<(), Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn math(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

/// Malformed input is a usage error; everything else is mathematical.
fn from_core(e: PhdaeError) -> Failure {
    match e {
        PhdaeError::ShapeMismatch { .. }
        | PhdaeError::EmptyCoefficients
        | PhdaeError::InvalidInterval { .. }
        | PhdaeError::Dimension(_)
        | PhdaeError::Invalid(_) => usage(e.to_string()),
        PhdaeError::HighIndex => math(format!("{e} (run `phdae reduce`)")),
        PhdaeError::Inconsistent { residual, tol } => math(format!(
            "initial state fails the consistency test on the algebraic equations at t0: \
             residual {residual:.3e} > tolerance {tol:.3e}; pass --project to project it"
        )),
        _ => math(e.to_string()),
    }
}

fn load(path: &Path) -> Result<(SystemDocument, PhdaeSystem), Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    let doc = SystemDocument::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let sys = doc.system().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((doc, sys))
}

fn beside(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("writing {}: {e}", path.display())))
}

fn write_report(path: &Path, report: &ReportDocument) -> Result<(), Failure> {
    write(path, &report.to_json().map_err(|e| math(e.to_string()))?)?;
    println!("report: {}", path.display());
    Ok(())
}

fn print_structure(rep: &StructureReport) {
    println!("structure check on {} grid points, tol {:e}", rep.grid_points, rep.tol);
    let rows = [
        ("skew_symmetry", "residual", rep.skew_symmetry_residual, rep.skew_symmetry),
        ("derivative_identity", "residual", rep.derivative_identity_residual, rep.derivative_identity),
        ("hamiltonian_psd", "min eig", rep.min_eig_qte, rep.hamiltonian_psd),
        ("dissipation_psd", "min eig", rep.min_eig_w, rep.dissipation_psd),
    ];
    for (name, what, value, ok) in rows {
        println!("  {name:<20} {what:<9} {value:>11.3e}  {}", if ok { "pass" } else { "FAIL" });
    }
}

fn structure_failure(rep: &StructureReport) -> Failure {
    let detail: Vec<String> = rep
        .failures()
        .into_iter()
        .map(|f| match f {
            "skew_symmetry" => format!("skew_symmetry residual {:.3e}", rep.skew_symmetry_residual),
            "derivative_identity" => format!("derivative_identity residual {:.3e}", rep.derivative_identity_residual),
            "hamiltonian_psd" => format!("hamiltonian_psd min eigenvalue {:.3e}", rep.min_eig_qte),
            other => format!("{other} min eigenvalue {:.3e}", rep.min_eig_w),
        })
        .collect();
    math(format!("structure verification failed: {}", detail.join(", ")))
}

pub fn verify(path: &Path, tol: f64, grid: usize, out: Option<PathBuf>) -> CmdResult {
    let (_, sys) = load(path)?;
    let rep = sys.verify_structure(grid, tol);
    print_structure(&rep);
    println!("result: {}", if rep.passed { "PASS" } else { "FAIL" });
    let mut report = ReportDocument::new("verify", Provenance::new(TOOL).tol("tol", tol));
    report.structure = Some(rep.clone());
    let out = out.unwrap_or_else(|| beside(path, "verify.report.json"));
    write_report(&out, &report)?;
    if rep.passed {
        Ok(())
    } else {
        Err(structure_failure(&rep))
    }
}

fn index_summary(sys: &PhdaeSystem, mu_max: usize, tol: f64) -> Result<(IndexAnalysis, IndexSummary), Failure> {
    let pencil = BehaviorPencil::from_system(sys).map_err(from_core)?;
    let free = strangeness_analysis(&pencil.free_response(), mu_max, tol);
    let mut summary = IndexSummary::new(&free, mu_max);
    if sys.m() > 0 {
        let full = strangeness_analysis(&pencil, mu_max, tol);
        summary.input_coupled_hidden = full.data.map(|d| d.input_coupled_hidden);
    }
    Ok((free, summary))
}

fn print_index(s: &IndexSummary) {
    println!("derivative-array analysis of the free response (u = 0)");
    println!("  {:>3} {:>4} {:>7} {:>3} {:>3} {:>3}  rank conditions", "mu", "r", "rank M", "a", "d", "nu");
    for l in &s.levels {
        println!(
            "  {:>3} {:>4} {:>7} {:>3} {:>3} {:>3}  {}",
            l.mu,
            l.r,
            l.rank_m,
            l.a,
            l.d,
            l.nu,
            if l.satisfied { "hold" } else { "fail" }
        );
    }
    match s.mu {
        Some(mu) => {
            println!(
                "mu = {mu}  r = {}  a = {}  d = {}  nu = {}",
                s.r.unwrap_or(0),
                s.a.unwrap_or(0),
                s.d.unwrap_or(0),
                s.nu.unwrap_or(0)
            );
            println!(
                "hidden constraints: {}  explicit constraints: {}",
                s.hidden_constraints.unwrap_or(0),
                s.explicit_constraints.unwrap_or(0)
            );
            if let Some(k) = s.input_coupled_hidden.filter(|&k| k > 0) {
                println!("input-coupled hidden constraints: {k}");
            }
        }
        None => println!("no level up to mu = {} satisfies the rank conditions", s.mu_max),
    }
}

pub fn analyze(path: &Path, mu_max: usize, tol: f64, out: Option<PathBuf>) -> CmdResult {
    let (_, sys) = load(path)?;
    let (_, summary) = index_summary(&sys, mu_max, tol)?;
    print_index(&summary);
    let mut report = ReportDocument::new("analyze", Provenance::new(TOOL).tol("rank_tol", tol));
    let found = summary.mu.is_some();
    report.index = Some(summary);
    write_report(&out.unwrap_or_else(|| beside(path, "analyze.report.json")), &report)?;
    if found {
        Ok(())
    } else {
        Err(math(format!("strangeness index exceeds mu_max = {mu_max}")))
    }
}

fn print_reduction(red: &Reduction) {
    let s = red.summary();
    println!("reduction: {}", s.kind);
    for (k, v) in &s.blocks {
        println!("  {k:<20} {v}");
    }
    for (k, v) in &s.residuals {
        println!("  {:<20} {v:.3e}", format!("{k} residual"));
    }
    for (k, v) in &s.condition_numbers {
        println!("  {:<20} {v:.3e}", format!("cond {k}"));
    }
}

pub fn reduce(path: &Path, out: Option<PathBuf>, report_path: Option<PathBuf>, mu_max: usize, tol: f64) -> CmdResult {
    let (doc, sys) = load(path)?;
    let red = reduce_to_ode(&sys, mu_max, tol).map_err(from_core)?;
    print_reduction(&red);
    let ode = red.ode();
    let check = ode.verify_structure(DEFAULT_GRID, DEFAULT_TOL);

    let mut reduced_doc = SystemDocument::from_system(ode);
    reduced_doc.input = doc.input.clone();
    let mut report = ReportDocument::new("reduce", Provenance::new(TOOL).tol("rank_tol", tol).tol("verify_tol", DEFAULT_TOL));
    let mut summary = red.summary();
    if let Some(x0) = doc.initial_state().map_err(from_core)? {
        let u0 = doc.input_signal().map_err(from_core)?.eval(sys.interval().t0);
        let residual = red.consistency_residual(&x0, &u0).map_err(from_core)?;
        let tol = 1e-8 * (1.0 + x0.norm() + u0.norm());
        let consistent = residual <= tol;
        println!("x0 consistency residual {residual:.3e} ({})", if consistent { "consistent" } else { "inconsistent" });
        reduced_doc.x0 = Some(red.restrict(&x0).map_err(from_core)?.iter().copied().collect());
        report.consistency = Some(ConsistencySummary {
            residual,
            tol,
            consistent,
            projected: false,
        });
    }
    summary.blocks.insert("reduced_size".into(), ode.n());
    report.reduction = Some(summary);
    report.structure = Some(check.clone());

    let out = out.unwrap_or_else(|| beside(path, "reduced.json"));
    write(&out, &reduced_doc.to_json())?;
    println!("reduced system: {} (n = {}, structure {})", out.display(), ode.n(), if check.passed { "verified" } else { "FAILED" });
    let report_path = report_path.unwrap_or_else(|| beside(path, "reduce.report.json"));
    write_report(&report_path, &report)?;
    if check.passed {
        Ok(())
    } else {
        Err(structure_failure(&check))
    }
}

fn parse_vec(text: &str, len: usize, what: &str) -> Result<DVector<f64>, Failure> {
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| usage(format!("{what}: {s:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != len {
        return Err(usage(format!("{what} has {} entries, expected {len}", vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("{what} has a non-finite entry")));
    }
    Ok(DVector::from_vec(vals))
}

fn parse_input(text: &str, m: usize) -> Result<Input, Failure> {
    let coeffs = text
        .split(';')
        .map(|c| parse_vec(c, m, "--u coefficient").map(|v| DMatrix::from_column_slice(m, 1, v.as_slice())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Input::Polynomial(MatFun::new(coeffs).map_err(from_core)?))
}

fn uniform_grid(t0: f64, tf: f64, h: f64) -> Result<Vec<f64>, Failure> {
    if !(h.is_finite() && h > 0.0) {
        return Err(usage(format!("step size must be positive, got {h}")));
    }
    let steps = ((tf - t0) / h).round().max(1.0) as usize;
    Ok((0..=steps).map(|k| t0 + (tf - t0) * k as f64 / steps as f64).collect())
}

fn print_energy(e: &EnergyReport) {
    println!("energy audit");
    println!("  {:<24} {:.6e}", "hamiltonian change", e.hamiltonian_change);
    println!("  {:<24} {:.6e}", "supplied energy", e.cumulative_supply);
    println!("  {:<24} {:.6e}", "dissipation margin", e.dissipation_margin);
    println!("  {:<24} {:.3e}", "max balance residual", e.max_balance_residual);
    println!("  {:<24} {}", "passivity", if e.violated { "VIOLATED" } else { "ok" });
}

fn write_csv(path: &Path, traj: &Trajectory) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(|e| usage(format!("creating {}: {e}", path.display())))?;
    traj.write_csv(file).map_err(|e| usage(e.to_string()))?;
    println!("trajectory: {}", path.display());
    Ok(())
}

pub struct SimulateArgs {
    pub path: PathBuf,
    pub x0: Option<String>,
    pub u: Option<String>,
    pub h: f64,
    pub method: String,
    pub csv: Option<PathBuf>,
    pub project: bool,
    pub out: Option<PathBuf>,
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let (doc, sys) = load(&a.path)?;
    let method: Method = a.method.parse().map_err(from_core)?;
    let x0 = match &a.x0 {
        Some(text) => parse_vec(text, sys.n(), "--x0")?,
        None => doc.initial_state().map_err(from_core)?.unwrap_or_else(|| DVector::zeros(sys.n())),
    };
    let input = match &a.u {
        Some(text) => parse_input(text, sys.m())?,
        None => doc.input_signal().map_err(from_core)?,
    };
    let iv = sys.interval();
    let grid = uniform_grid(iv.t0, iv.tf, a.h)?;
    let opts = SimOptions {
        method,
        project: a.project,
        ..Default::default()
    };
    let mut report = ReportDocument::new(
        "simulate",
        Provenance::new(TOOL).tol("consistency_tol", opts.consistency_tol).tol("h", a.h),
    );
    let out = a.out.clone().unwrap_or_else(|| beside(&a.path, "simulate.report.json"));
    let traj = match integrate(&sys, &input, &x0, &grid, opts) {
        Ok(t) => t,
        Err(e) => {
            let f = from_core(e.clone());
            if let PhdaeError::Inconsistent { residual, tol } = e {
                report.consistency = Some(ConsistencySummary {
                    residual,
                    tol,
                    consistent: false,
                    projected: false,
                });
                report.error = Some(f.message.clone());
                write_report(&out, &report)?;
            }
            return Err(f);
        }
    };
    let energy = energy_audit(&traj, &sys);
    println!("{} steps of {method:?} on [{}, {}]", grid.len() - 1, iv.t0, iv.tf);
    print_energy(&energy);
    if let Some(path) = &a.csv {
        write_csv(path, &traj)?;
    }
    report.consistency = Some(ConsistencySummary {
        residual: 0.0,
        tol: opts.consistency_tol,
        consistent: true,
        projected: (&traj.states[0] - &x0).amax() > 0.0,
    });
    let violated = energy.violated;
    report.energy = Some(energy);
    write_report(&out, &report)?;
    if violated {
        Err(math("energy audit: dissipation inequality violated"))
    } else {
        Ok(())
    }
}

fn require_preset(name: &str) -> Result<PhdaeSystem, Failure> {
    models::preset(name).ok_or_else(|| usage(format!("unknown preset {name:?}; available: {}", models::PRESET_NAMES.join(", "))))
}

pub fn export(name: &str, out: Option<PathBuf>) -> CmdResult {
    let text = SystemDocument::from_system(&require_preset(name)?).to_json();
    match out {
        Some(path) => {
            write(&path, &text)?;
            println!("{}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

pub fn demo(name: &str, h: f64, out_dir: Option<PathBuf>) -> CmdResult {
    let sys = require_preset(name)?;
    println!("== {name}: n = {}, m = {}", sys.n(), sys.m());
    let mut report = ReportDocument::new(
        "demo",
        Provenance::new(TOOL).tol("tol", DEFAULT_TOL).tol("rank_tol", RANK_TOL).tol("h", h),
    );

    println!("\n-- verify");
    let st = sys.verify_structure(DEFAULT_GRID, DEFAULT_TOL);
    print_structure(&st);
    report.structure = Some(st.clone());
    if !st.passed {
        return Err(structure_failure(&st));
    }

    println!("\n-- analyze");
    let (_, idx) = index_summary(&sys, 3, RANK_TOL)?;
    print_index(&idx);
    report.index = Some(idx);

    println!("\n-- reduce");
    let red = reduce_to_ode(&sys, 3, RANK_TOL).map_err(from_core)?;
    print_reduction(&red);
    let ode_check = red.ode().verify_structure(DEFAULT_GRID, DEFAULT_TOL);
    println!("  reduced ODE (n = {}) structure: {}", red.ode().n(), if ode_check.passed { "verified" } else { "FAILED" });
    if !ode_check.passed {
        return Err(structure_failure(&ode_check));
    }
    report.reduction = Some(red.summary());

    println!("\n-- simulate (u = 0)");
    // the index-one system: the regularized subsystem when there is one
    let sim_sys = red.index_one_system().unwrap_or(&sys).clone();
    let seed = DVector::from_fn(sim_sys.n(), |i, _| 1.0 - 0.25 * (i % 5) as f64);
    let iv = sim_sys.interval();
    let grid = uniform_grid(iv.t0, iv.tf, h)?;
    let opts = SimOptions {
        project: true,
        ..Default::default()
    };
    let input = Input::Zero(sim_sys.m());
    let mut traj = integrate(&sim_sys, &input, &seed, &grid, opts).map_err(from_core)?;
    let energy = energy_audit(&traj, &sim_sys);
    if let Some(reg) = &red.regularized {
        traj.states = traj.states.iter().map(|xs| reg.lift(xs)).collect();
    }
    // dual route: the reduced ODE from the restricted initial state
    let u0 = DVector::zeros(sys.m());
    let xr0 = red.restrict(&traj.states[0]).map_err(from_core)?;
    let ode_traj = integrate(red.ode(), &input, &xr0, &grid, SimOptions::default()).map_err(from_core)?;
    let deviation = ode_traj
        .states
        .iter()
        .zip(&traj.states)
        .map(|(xr, x)| (red.lift(xr, &u0) - x).amax())
        .fold(0.0, f64::max);
    println!("  {} steps, initial state projected onto the constraints", grid.len() - 1);
    println!("  max deviation between full and reduced simulations: {deviation:.3e}");

    println!("\n-- audit");
    print_energy(&energy);
    report.energy = Some(energy.clone());

    if let Some(dir) = out_dir {
        fs::create_dir_all(&dir).map_err(|e| usage(format!("creating {}: {e}", dir.display())))?;
        write(&dir.join(format!("{name}.json")), &SystemDocument::from_system(&sys).to_json())?;
        write(&dir.join(format!("{name}.reduced.json")), &SystemDocument::from_system(red.ode()).to_json())?;
        write_csv(&dir.join(format!("{name}.csv")), &traj)?;
        write_report(&dir.join(format!("{name}.report.json")), &report)?;
    }
    if energy.violated || energy.dissipation_margin < -energy.tol {
        return Err(math("energy audit: dissipation inequality violated"));
    }
    println!("\ndemo {name}: PASS");
    Ok(())
}
