//! The four subcommands. Each returns a process exit code and reports problems on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pdm_core::transforms::{cosine_fit, map_trajectory, sho_residual, verify_f_consistency};
use pdm_core::{Error, OrbitFamily, Trajectory, VerificationReport};
use serde::Serialize;

use crate::csv::{write_reference, write_trajectory_file};
use crate::exit;
use crate::scenario::{load_json, Resolved, Scenario, ScenarioCheck};
use crate::suite::{position_error, run_suite, SuiteError, SuiteOptions};
use crate::sweep::{run_sweep, write_sweep_file, SweepSpec};

/// Parses `NAME=VALUE` tolerance overrides.
pub fn parse_tolerance(arg: &str) -> Result<(String, f64), String> {
    let (name, value) = arg.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{arg}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("tolerance `{value}`: {e}"))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(format!("tolerance for `{name}` must be positive and finite"));
    }
    Ok((name.trim().to_string(), value))
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::DomainExit { .. } | Error::Domain(_) | Error::SingularMass(_) | Error::BranchDomain(_) => {
            exit::DOMAIN_EXIT
        }
        Error::Collinearity(_) | Error::Validity(_) => exit::VALIDITY,
        _ => exit::CONFIG,
    }
}

fn ensure_dir(out: &Path) -> Result<(), i32> {
    fs::create_dir_all(out).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", out.display());
        exit::CONFIG
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), i32> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        exit::CONFIG
    })
}

fn load_scenario(path: &Path) -> Result<(Scenario, Resolved), i32> {
    let name = path.display().to_string();
    let scenario = Scenario::load(path).map_err(|e| {
        eprintln!("config error: {e}");
        exit::CONFIG
    })?;
    let resolved = scenario.resolve(&name).map_err(|e| {
        eprintln!("config error: {e}");
        exit::CONFIG
    })?;
    Ok((scenario, resolved))
}

/// Outcome of integrating a resolved scenario: the (possibly partial) trajectory
/// and the error that cut it short.
fn run_integration(resolved: &Resolved) -> (Option<Trajectory>, Option<Error>) {
    match pdm_core::integrate(&resolved.model, resolved.form, &resolved.initial, &resolved.config) {
        Ok(t) => (Some(t), None),
        Err(e) => (e.partial_trajectory().cloned(), Some(e)),
    }
}

#[derive(Serialize)]
struct RunSummary {
    scenario: String,
    status: String,
    exit_code: i32,
    message: String,
    samples: usize,
    t_final: Option<f64>,
    energy_initial: Option<f64>,
    energy_final: Option<f64>,
    relative_energy_drift: Option<f64>,
    checks: Vec<VerificationReport>,
}

fn scenario_check(check: ScenarioCheck, resolved: &Resolved, traj: &Trajectory, tol: f64) -> VerificationReport {
    let name = check.name();
    let failed = |e: Error| VerificationReport::from_residuals(name, [f64::NAN], tol).with_notes(format!("error: {e}"));
    match check {
        ScenarioCheck::EnergyDrift => VerificationReport::from_residuals(name, [traj.relative_energy_drift()], tol),
        ScenarioCheck::ClosedFormError => match resolved.orbit.as_ref().map(|o| position_error(traj, o)) {
            Some(Ok(e)) => VerificationReport::from_residuals(name, [e], tol),
            Some(Err(e)) => failed(e),
            None => failed(Error::Config("no closed-form orbit".into())),
        },
        ScenarioCheck::ShoResidual => {
            match map_trajectory(traj).and_then(|r| sho_residual(&r, resolved.model.omega0, tol)) {
                Ok(mut r) => {
                    r.passed = r.rms_residual <= tol;
                    r.with_notes("pass rule: RMS")
                }
                Err(e) => failed(e),
            }
        }
        ScenarioCheck::CosineFit => match map_trajectory(traj).and_then(|r| cosine_fit(&r)) {
            Ok(fit) => VerificationReport::from_residuals(name, [(fit.omega / resolved.model.omega0 - 1.0).abs()], tol)
                .with_notes(format!("fitted omega {}", fit.omega)),
            Err(e) => failed(e),
        },
        ScenarioCheck::FConsistency => verify_f_consistency(&resolved.model, traj, tol).unwrap_or_else(failed),
    }
}

fn check_overrides(checks: &[ScenarioCheck], tolerances: &[(String, f64)]) -> Result<BTreeMap<String, f64>, i32> {
    let mut out = BTreeMap::new();
    for (name, tol) in tolerances {
        if !checks.iter().any(|c| c.name() == name) {
            eprintln!("config error: --tol names `{name}`, which the scenario does not run");
            return Err(exit::CONFIG);
        }
        out.insert(name.clone(), *tol);
    }
    Ok(out)
}

/// `simulate`: trajectory CSV plus run summary. A domain exit still flushes the partial CSV.
pub fn simulate(scenario_path: &Path, out: &Path, tolerances: &[(String, f64)]) -> i32 {
    match simulate_inner(scenario_path, out, tolerances) {
        Ok(code) | Err(code) => code,
    }
}

fn simulate_inner(scenario_path: &Path, out: &Path, tolerances: &[(String, f64)]) -> Result<i32, i32> {
    let (scenario, resolved) = load_scenario(scenario_path)?;
    let overrides = check_overrides(&scenario.checks, tolerances)?;
    ensure_dir(out)?;
    let (traj, error) = run_integration(&resolved);
    let csv_path = out.join(&scenario.output.trajectory_csv);
    if let Some(t) = &traj {
        write_trajectory_file(&csv_path, t).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", csv_path.display());
            exit::CONFIG
        })?;
    }
    let mut checks = Vec::new();
    let (mut code, status, message) = match &error {
        None => (exit::SUCCESS, "completed".to_string(), String::new()),
        Some(e) => {
            let code = exit_code_for(e);
            let status = match code {
                exit::DOMAIN_EXIT => "domain_exit",
                exit::VALIDITY => "validity_gate",
                _ => "config_error",
            };
            eprintln!("{status}: {e}");
            (code, status.to_string(), e.to_string())
        }
    };
    if let (Some(t), None) = (&traj, &error) {
        for &check in &scenario.checks {
            let tol = overrides.get(check.name()).copied().unwrap_or(check.default_tolerance());
            let report = scenario_check(check, &resolved, t, tol);
            if !report.passed {
                eprintln!("FAIL {}: max {:e} > {:e}", report.check_name, report.max_residual, tol);
                code = exit::CHECK_FAILED;
            }
            checks.push(report);
        }
    }
    let summary = RunSummary {
        scenario: scenario_path.display().to_string(),
        status,
        exit_code: code,
        message,
        samples: traj.as_ref().map_or(0, Trajectory::len),
        t_final: traj.as_ref().and_then(|t| t.last()).map(|s| s.state.t),
        energy_initial: traj.as_ref().and_then(|t| t.samples.first()).map(|s| s.energy),
        energy_final: traj.as_ref().and_then(|t| t.last()).map(|s| s.energy),
        relative_energy_drift: traj.as_ref().filter(|t| !t.is_empty()).map(Trajectory::relative_energy_drift),
        checks,
    };
    write_json(&out.join(&scenario.output.summary_json), &summary)?;
    Ok(code)
}

#[derive(Serialize)]
struct FitSummary {
    scenario: String,
    omega0: f64,
    fitted_omega: f64,
    relative_omega_error: f64,
    fit_rms: f64,
    amplitudes: Vec<f64>,
    phase: f64,
    sho_max_residual: f64,
    sho_rms_residual: f64,
    samples: usize,
}

/// `linearize`: reference `(τ, q, q̃)` CSV plus a cosine-fit summary.
pub fn linearize(scenario_path: &Path, out: &Path) -> i32 {
    match linearize_inner(scenario_path, out) {
        Ok(code) | Err(code) => code,
    }
}

fn linearize_inner(scenario_path: &Path, out: &Path) -> Result<i32, i32> {
    let (scenario, resolved) = load_scenario(scenario_path)?;
    let (traj, error) = run_integration(&resolved);
    if let Some(e) = error {
        let code = exit_code_for(&e);
        eprintln!("{}: {e}", if code == exit::VALIDITY { "validity gate" } else { "integration stopped" });
        return Err(code);
    }
    let traj = traj.expect("successful integration returns a trajectory");
    let fail = |e: Error| {
        eprintln!("validity gate: {e}");
        exit_code_for(&e)
    };
    let reference = map_trajectory(&traj).map_err(fail)?;
    let fit = cosine_fit(&reference).map_err(fail)?;
    let sho = sho_residual(&reference, resolved.model.omega0, ScenarioCheck::ShoResidual.default_tolerance())
        .map_err(fail)?;
    ensure_dir(out)?;
    let path = out.join(&scenario.output.reference_csv);
    fs::File::create(&path).and_then(|f| write_reference(f, &traj.times(), &reference)).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        exit::CONFIG
    })?;
    let summary = FitSummary {
        scenario: scenario_path.display().to_string(),
        omega0: resolved.model.omega0,
        fitted_omega: fit.omega,
        relative_omega_error: (fit.omega / resolved.model.omega0 - 1.0).abs(),
        fit_rms: fit.rms_error,
        amplitudes: fit.amplitudes,
        phase: fit.phase,
        sho_max_residual: sho.max_residual,
        sho_rms_residual: sho.rms_residual,
        samples: reference.len(),
    };
    write_json(&out.join(&scenario.output.summary_json), &summary)?;
    Ok(exit::SUCCESS)
}

/// `verify`: runs the registered suite and writes `report.json` (or prints it).
pub fn verify(
    family: Option<&str>,
    tolerances: &[(String, f64)],
    out: Option<&Path>,
    omega_corruption: Option<f64>,
) -> i32 {
    let family = match family.map(|f| OrbitFamily::parse(f).ok_or(f)) {
        Some(Err(f)) => {
            eprintln!("config error: unknown family `{f}` (expected ML1, PL1, ML2, PL2 or SHIFTED_ML1)");
            return exit::CONFIG;
        }
        Some(Ok(f)) => Some(f),
        None => None,
    };
    let options = SuiteOptions { family, tolerances: tolerances.iter().cloned().collect(), omega_corruption };
    let reports = match run_suite(&options) {
        Ok(r) => r,
        Err(e @ (SuiteError::UnknownCheck(_) | SuiteError::BadTolerance(_))) => {
            eprintln!("config error: {e}");
            return exit::CONFIG;
        }
    };
    for r in &reports {
        eprintln!(
            "{} {} (max {:e}, tol {:e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.check_name,
            r.max_residual,
            r.tolerance
        );
    }
    let text = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    match out {
        Some(dir) => {
            if let Err(code) = ensure_dir(dir) {
                return code;
            }
            if let Err(e) = fs::write(dir.join("report.json"), text) {
                eprintln!("error: cannot write report: {e}");
                return exit::CONFIG;
            }
        }
        None => print!("{text}"),
    }
    if reports.iter().all(|r| r.passed) {
        exit::SUCCESS
    } else {
        exit::CHECK_FAILED
    }
}

/// `sweep`: integrates every grid point and writes the frequency/energy table.
pub fn sweep(spec_path: &Path, out: &Path, jobs: usize) -> i32 {
    let spec: SweepSpec = match load_json(spec_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit::CONFIG;
        }
    };
    let rows = match run_sweep(&spec, jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return exit::CONFIG;
        }
    };
    if let Err(code) = ensure_dir(out) {
        return code;
    }
    let path: PathBuf = out.join(&spec.output_csv);
    if let Err(e) = write_sweep_file(&path, &rows) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return exit::CONFIG;
    }
    let incomplete = rows.iter().filter(|r| !r.completed()).count();
    if incomplete > 0 {
        eprintln!("{incomplete} of {} grid points did not complete; see the status column", rows.len());
    }
    exit::SUCCESS
}
