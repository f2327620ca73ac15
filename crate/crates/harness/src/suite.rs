//! Registered verification checks run by `pdmosc verify`.
//!
//! Every check carries the orbit families it concerns, a default tolerance that
//! `--tol NAME=VALUE` can override, and produces one [`VerificationReport`].

use std::collections::BTreeMap;

use pdm_core::closed_form::{admissible_times, ml2_constraint_check, orbit_residual, pl2_sign_regime_report};
use pdm_core::dynamics::{acceleration, newtonian_vector_residual, total_energy};
use pdm_core::profiles::{mass, potential_gradient, space_scale_g, time_scale_f};
use pdm_core::transforms::{accumulate_tau, cosine_fit, map_trajectory, sho_residual, ReferenceTrajectory};
use pdm_core::{
    build_orbit, evaluate_orbit, integrate, Branch, ClosedFormOrbit, EomForm, IntegratorConfig, OrbitFamily,
    OscillatorModel, PdmProfile, PhaseState, Sample, Trajectory, VerificationReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::sweep::{self, SweepSpec};

/// Equations every closed-form orbit is substituted into.
pub const ORBIT_FORMS: [EomForm; 5] =
    [EomForm::El2Direct, EomForm::El2Mdot, EomForm::El2Radial, EomForm::NewtonFull, EomForm::NewtonParallel];

pub const SAMPLES_PER_ORBIT: usize = 1000;
pub const RANDOM_STATES: usize = 10_000;

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub family: Option<OrbitFamily>,
    pub tolerances: BTreeMap<String, f64>,
    /// Test hook: multiplies every closed-form Ω before substitution.
    pub omega_corruption: Option<f64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SuiteError {
    #[error("unknown check `{0}` in tolerance override")]
    UnknownCheck(String),
    #[error("tolerance for `{0}` must be positive and finite")]
    BadTolerance(String),
}

type Runner = fn(&Context, f64) -> VerificationReport;

pub struct Check {
    pub name: String,
    pub families: Vec<OrbitFamily>,
    pub tolerance: f64,
    runner: Runner,
}

pub struct Context {
    pub omega_corruption: f64,
}

fn fam_name(f: OrbitFamily) -> &'static str {
    f.name()
}

/// All registered checks in report order.
pub fn registry() -> Vec<Check> {
    use OrbitFamily::*;
    let mut out = Vec::new();
    let mut add = |name: String, families: Vec<OrbitFamily>, tolerance: f64, runner: Runner| {
        out.push(Check { name, families, tolerance, runner });
    };
    for fam in OrbitFamily::ALL {
        let runner: Runner = match fam {
            Ml1 => |c, t| closed_form_check(Ml1, c, t),
            Pl1 => |c, t| closed_form_check(Pl1, c, t),
            Ml2 => |c, t| closed_form_check(Ml2, c, t),
            Pl2 => |c, t| closed_form_check(Pl2, c, t),
            ShiftedMl1 => |c, t| closed_form_check(ShiftedMl1, c, t),
        };
        add(format!("closed_form.{}", fam_name(fam)), vec![fam], 1e-9, runner);
    }
    for fam in OrbitFamily::ALL {
        let runner: Runner = match fam {
            Ml1 => |_, t| energy_check(Ml1, t),
            Pl1 => |_, t| energy_check(Pl1, t),
            Ml2 => |_, t| energy_check(Ml2, t),
            Pl2 => |_, t| energy_check(Pl2, t),
            ShiftedMl1 => |_, t| energy_check(ShiftedMl1, t),
        };
        add(format!("energy.{}", fam_name(fam)), vec![fam], 1e-10, runner);
    }
    for fam in OrbitFamily::ALL {
        let (collinear, newtonian, scale): (Runner, Runner, Runner) = match fam {
            Ml1 => {
                (|_, t| collinear_forms_check(Ml1, t), |_, t| newtonian_check(Ml1, t), |_, t| space_scale_check(Ml1, t))
            }
            Pl1 => {
                (|_, t| collinear_forms_check(Pl1, t), |_, t| newtonian_check(Pl1, t), |_, t| space_scale_check(Pl1, t))
            }
            Ml2 => {
                (|_, t| collinear_forms_check(Ml2, t), |_, t| newtonian_check(Ml2, t), |_, t| space_scale_check(Ml2, t))
            }
            Pl2 => {
                (|_, t| collinear_forms_check(Pl2, t), |_, t| newtonian_check(Pl2, t), |_, t| space_scale_check(Pl2, t))
            }
            ShiftedMl1 => (
                |_, t| collinear_forms_check(ShiftedMl1, t),
                |_, t| newtonian_check(ShiftedMl1, t),
                |_, t| space_scale_check(ShiftedMl1, t),
            ),
        };
        add(format!("invariance.collinear_forms.{}", fam_name(fam)), vec![fam], 1e-12, collinear);
        add(format!("invariance.newtonian.{}", fam_name(fam)), vec![fam], 1e-12, newtonian);
        add(format!("invariance.space_scale.{}", fam_name(fam)), vec![fam], 1e-12, scale);
    }
    add("invariance.type_two_rhs.ML2".into(), vec![Ml2], 1e-12, |_, t| ml2_rhs_check(t));
    add("ml2_constraint.mismatch_detected.ML2".into(), vec![Ml2], 1e-12, |_, t| ml2_mismatch_check(t));
    add("integration.rk4.ML1".into(), vec![Ml1], 1e-6, |_, t| integration_check(false, t));
    add("integration.rk45.ML1".into(), vec![Ml1], 1e-8, |_, t| integration_check(true, t));
    add("integration.energy_drift.ML1".into(), vec![Ml1], 1e-8, |_, t| energy_drift_check(t));
    add("integration.rk4_order.ML1".into(), vec![Ml1], 0.3, |_, t| order_check(t));
    add("linearization.sho.ML1".into(), vec![Ml1], 1e-4, |_, t| linearization_check(Ml1, false, t));
    add("linearization.fit.ML1".into(), vec![Ml1], 1e-6, |_, t| linearization_check(Ml1, true, t));
    add("linearization.sho.SHIFTED_ML1".into(), vec![ShiftedMl1], 1e-4, |_, t| {
        linearization_check(ShiftedMl1, false, t)
    });
    add("linearization.fit.SHIFTED_ML1".into(), vec![ShiftedMl1], 1e-6, |_, t| {
        linearization_check(ShiftedMl1, true, t)
    });
    add("linearization.sho.PL1".into(), vec![Pl1], 1e-4, |_, t| pl1_linearization_check(t));
    add("linearization.half_orbit.ML2".into(), vec![Ml2], 1e-4, |_, t| ml2_half_orbit_check(t));
    add("frequency.ML1".into(), vec![Ml1], 1e-4, |_, t| frequency_check(Ml1, t));
    add("frequency.PL1".into(), vec![Pl1], 1e-4, |_, t| frequency_check(Pl1, t));
    add("sign_regime.PL2".into(), vec![Pl2], 1e-9, |_, t| {
        pl2_sign_regime_report(1.0, &[1.0, 0.5], 2.0, SAMPLES_PER_ORBIT, t)
            .unwrap_or_else(|e| error_report("sign_regime.PL2", t, e))
    });
    out
}

/// Runs the registered checks selected by `options`, in registry order.
pub fn run_suite(options: &SuiteOptions) -> Result<Vec<VerificationReport>, SuiteError> {
    let checks = registry();
    for (name, tol) in &options.tolerances {
        if !checks.iter().any(|c| &c.name == name) {
            return Err(SuiteError::UnknownCheck(name.clone()));
        }
        if !(*tol > 0.0 && tol.is_finite()) {
            return Err(SuiteError::BadTolerance(name.clone()));
        }
    }
    let ctx = Context { omega_corruption: options.omega_corruption.unwrap_or(1.0) };
    let selected: Vec<&Check> =
        checks.iter().filter(|c| options.family.is_none_or(|f| c.families.contains(&f))).collect();
    Ok(selected
        .par_iter()
        .map(|c| {
            let tol = options.tolerances.get(&c.name).copied().unwrap_or(c.tolerance);
            let mut report = (c.runner)(&ctx, tol);
            report.check_name = c.name.clone();
            report
        })
        .collect())
}

fn error_report(name: &str, tol: f64, e: impl std::fmt::Display) -> VerificationReport {
    VerificationReport::from_residuals(name, [f64::NAN], tol).with_notes(format!("error: {e}"))
}

/// Report whose pass rule is `rms ≤ tol` instead of `max ≤ tol`.
fn rms_report(name: &str, report: VerificationReport, tol: f64) -> VerificationReport {
    let mut r = report;
    r.check_name = name.into();
    r.tolerance = tol;
    r.passed = r.rms_residual <= tol && !r.max_residual.is_nan();
    r
}

// ---------------------------------------------------------------------------
// Parameter grids

fn ml(lambda: f64, branch: Branch) -> PdmProfile {
    PdmProfile::MathewsLakshmanan { lambda, branch }
}

/// Closed-form parameter combinations `(model, amplitudes, phase)` for a family.
pub fn orbit_grid(family: OrbitFamily) -> Vec<(OscillatorModel, Vec<f64>, f64)> {
    let amp_sets: [&[f64]; 3] = [&[0.5], &[0.3, -0.4], &[0.2, 0.3, 0.4]];
    let mut out = Vec::new();
    match family {
        OrbitFamily::Ml1 => {
            for lambda in [0.25, 0.5, 1.0] {
                for branch in [Branch::Plus, Branch::Minus] {
                    for (j, amps) in amp_sets.iter().enumerate() {
                        for w in [0.5, 1.0, 2.0] {
                            let m = OscillatorModel::type_a(ml(lambda, branch), amps.len(), w).unwrap();
                            out.push((m, amps.to_vec(), 0.3 * j as f64));
                        }
                    }
                }
            }
        }
        OrbitFamily::Pl1 => {
            for upsilon in [-0.5, 0.5, 1.0, 2.0] {
                for k in [0.5, 2.0] {
                    for amps in amp_sets {
                        for w in [1.0, 1.7] {
                            let m = OscillatorModel::type_a(PdmProfile::PowerLaw { k, upsilon }, amps.len(), w)
                                .unwrap()
                                .with_m0(1.5)
                                .unwrap();
                            out.push((m, amps.to_vec(), -0.2));
                        }
                    }
                }
            }
        }
        OrbitFamily::Ml2 => {
            for lambda in [0.5_f64, 1.0, 2.0] {
                for branch in [Branch::Minus, Branch::Plus] {
                    for amps in amp_sets {
                        for w in [0.8, 1.5] {
                            let dim = amps.len();
                            let dir: Vec<f64> =
                                (0..dim).map(|i| (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
                            let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
                            let zeta = dir.iter().map(|c| c / norm / lambda.sqrt()).collect();
                            let mut m = OscillatorModel::type_b(ml(lambda, branch), zeta, w).unwrap();
                            if branch == Branch::Plus {
                                m = m.with_imaginary_zeta().unwrap();
                            }
                            out.push((m, amps.to_vec(), 0.7));
                        }
                    }
                }
            }
        }
        OrbitFamily::Pl2 => {
            for lambda in [0.5_f64, 1.0, 2.0] {
                for amps in amp_sets {
                    for w in [0.5, 1.0, 2.0] {
                        let dim = amps.len();
                        let zeta = (0..dim).map(|i| if i == 0 { 1.0 / lambda.sqrt() } else { 0.0 }).collect();
                        let m = OscillatorModel::type_b(PdmProfile::PowerLaw { k: lambda, upsilon: -1.0 }, zeta, w)
                            .unwrap()
                            .with_imaginary_zeta()
                            .unwrap();
                        out.push((m, amps.to_vec(), 0.1));
                    }
                }
            }
        }
        OrbitFamily::ShiftedMl1 => {
            let shifts: [&[f64]; 3] = [&[0.4], &[-0.3, 0.2], &[0.1, 0.5, -0.6]];
            for lambda in [0.25, 0.5, 1.0] {
                for branch in [Branch::Plus, Branch::Minus] {
                    for (j, shift) in shifts.iter().enumerate() {
                        for w in [1.0, 2.0] {
                            let profile = PdmProfile::ShiftedMl { lambda, branch, shift: shift.to_vec() };
                            let m = OscillatorModel::type_c(profile, w).unwrap();
                            out.push((m, amp_sets[j].to_vec(), -0.4));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Substitutes every orbit of the family grid into every exact and reduced form.
pub fn closed_form_residuals(family: OrbitFamily, omega_factor: f64, tol: f64) -> (VerificationReport, usize, usize) {
    let grid = orbit_grid(family);
    let mut residuals = Vec::new();
    let mut samples = 0;
    for (model, amps, phase) in &grid {
        let mut orbit = match build_orbit(model, amps, *phase) {
            Ok(o) => o,
            Err(e) => return (error_report("closed_form", tol, e), grid.len(), 0),
        };
        let times = admissible_times(&orbit, SAMPLES_PER_ORBIT);
        orbit.omega *= omega_factor;
        samples = times.len();
        for form in ORBIT_FORMS {
            match orbit_residual(model, &orbit, form, &times, tol) {
                Ok(r) => residuals.push(r.max_residual),
                Err(e) => return (error_report("closed_form", tol, e), grid.len(), samples),
            }
        }
    }
    let report = VerificationReport::from_residuals("closed_form", residuals, tol).with_notes(format!(
        "{} parameter combinations x {samples} time samples x {} equation forms",
        grid.len(),
        ORBIT_FORMS.len()
    ));
    (report, grid.len(), samples)
}

fn closed_form_check(family: OrbitFamily, ctx: &Context, tol: f64) -> VerificationReport {
    let (mut r, _, _) = closed_form_residuals(family, ctx.omega_corruption, tol);
    if ctx.omega_corruption != 1.0 {
        r.notes = format!("{}; Omega multiplied by {}", r.notes, ctx.omega_corruption);
    }
    r
}

/// `E(0)` from the state at the turning point against the family energy formula.
pub fn energy_formula_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    let mut residuals = Vec::new();
    for (model, amps, _) in orbit_grid(family) {
        let orbit = match build_orbit(&model, &amps, 0.0) {
            Ok(o) => o,
            Err(e) => return error_report("energy", tol, e),
        };
        let state = evaluate_orbit(&orbit, 0.0).and_then(|s| total_energy(&model, &s));
        match state {
            Ok(e) => residuals.push((e - orbit.energy).abs() / orbit.energy.abs().max(f64::MIN_POSITIVE)),
            Err(e) => return error_report("energy", tol, e),
        }
    }
    VerificationReport::from_residuals("energy", residuals, tol)
        .with_notes("relative gap between total energy at t = 0 and the closed-form energy")
}

fn energy_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    energy_formula_check(family, tol)
}

// ---------------------------------------------------------------------------
// Random-state invariance checks

/// Models representing a family, with a radius bound keeping states in the domain.
fn family_models(family: OrbitFamily) -> Vec<(OscillatorModel, f64)> {
    orbit_grid(family)
        .into_iter()
        .map(|(m, _, _)| {
            let reach = match &m.profile {
                PdmProfile::MathewsLakshmanan { lambda, branch: Branch::Minus }
                | PdmProfile::ShiftedMl { lambda, branch: Branch::Minus, .. } => 0.95 / lambda.sqrt(),
                _ => 2.0,
            };
            (m, reach.min(2.0))
        })
        .collect()
}

fn random_state(rng: &mut ChaCha8Rng, model: &OscillatorModel, reach: f64, collinear: bool) -> PhaseState {
    let n = model.dim;
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.1 {
            break d.iter().map(|c| c / norm).collect();
        }
    };
    let rho = rng.gen_range(0.05..reach);
    let p: Vec<f64> = dir.iter().map(|c| c * rho).collect();
    let shift = model.profile.shift().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let x = p.iter().zip(&shift).map(|(a, b)| a - b).collect();
    let v = if collinear {
        let c = rng.gen_range(-3.0..3.0);
        p.iter().map(|pi| c * pi).collect()
    } else {
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()
    };
    PhaseState::new(0.0, x, v)
}

fn scaled_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0_f64, |m, c| m.max(c.abs()));
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn for_random_states(
    family: OrbitFamily,
    seed: u64,
    collinear: bool,
    mut f: impl FnMut(&OscillatorModel, &PhaseState) -> pdm_core::Result<f64>,
) -> Result<Vec<f64>, pdm_core::Error> {
    let models = family_models(family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(RANDOM_STATES);
    for k in 0..RANDOM_STATES {
        let (model, reach) = &models[k % models.len()];
        let s = random_state(&mut rng, model, *reach, collinear);
        out.push(f(model, &s)?);
    }
    Ok(out)
}

/// Direct, ṁ, radial and parallel Newtonian accelerations agree on collinear states.
pub fn collinear_forms_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    let res = for_random_states(family, 11, true, |model, s| {
        let direct = acceleration(model, EomForm::El2Direct, s)?;
        let mut worst = 0.0_f64;
        for form in [EomForm::El2Mdot, EomForm::El2Radial, EomForm::NewtonParallel] {
            worst = worst.max(scaled_gap(&acceleration(model, form, s)?, &direct));
        }
        Ok(worst)
    });
    match res {
        Ok(r) => VerificationReport::from_residuals("collinear_forms", r, tol)
            .with_notes(format!("{RANDOM_STATES} random collinear states")),
        Err(e) => error_report("collinear_forms", tol, e),
    }
}

/// The Newtonian vector balance annihilates direct EL-II accelerations.
pub fn newtonian_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    let res = for_random_states(family, 12, false, |model, s| {
        let a = acceleration(model, EomForm::El2Direct, s)?;
        let r = newtonian_vector_residual(model, s, &a)?;
        let m = mass(&model.profile, &s.x)?.abs();
        let grad = potential_gradient(model, &s.x)?;
        let scale =
            a.iter().map(|c| model.m0 * m * c.abs()).chain(grad.iter().map(|g| g.abs())).fold(1.0_f64, f64::max);
        Ok(r.iter().fold(0.0_f64, |acc, c| acc.max(c.abs())) / scale)
    });
    match res {
        Ok(r) => VerificationReport::from_residuals("newtonian", r, tol)
            .with_notes(format!("{RANDOM_STATES} random states, no collinearity")),
        Err(e) => error_report("newtonian", tol, e),
    }
}

/// `g = m f²` along rays of every model of the family.
pub fn space_scale_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    let mut residuals = Vec::new();
    for (model, reach) in family_models(family) {
        let n = model.dim;
        let shift = model.profile.shift().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        for k in 1..=100 {
            let rho = reach * k as f64 / 101.0;
            let x: Vec<f64> = (0..n).map(|i| rho / (n as f64).sqrt() - shift[i]).collect();
            let gap = (|| -> pdm_core::Result<f64> {
                let g = space_scale_g(&model, &x)?;
                let m = mass(&model.profile, &x)?;
                let f = time_scale_f(&model, &x)?;
                Ok((g - m * f * f).abs() / g.abs().max(1.0))
            })();
            match gap {
                Ok(g) => residuals.push(g),
                Err(e) => return error_report("space_scale", tol, e),
            }
        }
    }
    VerificationReport::from_residuals("space_scale", residuals, tol)
}

/// Type-II Mathews-Lakshmanan accelerations equal the type-I ones when `ζ² = ∓1/λ`.
pub fn ml2_rhs_check(tol: f64) -> VerificationReport {
    let mut residuals = Vec::new();
    let mut notes = Vec::new();
    for (model, reach) in family_models(OrbitFamily::Ml2) {
        let c = ml2_constraint_check(&model);
        residuals.push(c.max_residual);
        if notes.is_empty() {
            notes.push(c.notes);
        }
        let type_a = OscillatorModel::type_a(model.profile.clone(), model.dim, model.omega0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for k in 0..RANDOM_STATES / 36 {
            let s = random_state(&mut rng, &model, reach, k % 2 == 0);
            for form in [EomForm::El2Direct, EomForm::El2Radial] {
                match (acceleration(&model, form, &s), acceleration(&type_a, form, &s)) {
                    (Ok(b), Ok(a)) => residuals.push(scaled_gap(&b, &a)),
                    (Err(e), _) | (_, Err(e)) => return error_report("type_two_rhs", tol, e),
                }
            }
        }
    }
    VerificationReport::from_residuals("type_two_rhs", residuals, tol).with_notes(notes.join(" "))
}

/// The constraint check flags `ζ²` of the wrong sign (plus branch, real ζ).
pub fn ml2_mismatch_check(tol: f64) -> VerificationReport {
    let model = OscillatorModel::type_b(ml(4.0, Branch::Plus), vec![0.5, 0.0], 1.0).unwrap();
    let r = ml2_constraint_check(&model);
    let detected = !r.passed && r.notes.contains("sign mismatch");
    let mut out = VerificationReport::from_residuals("mismatch_detected", [if detected { 0.0 } else { 1.0 }], tol);
    out.notes = format!("plus branch, lambda = 4, |zeta|^2 = 0.25 -> {}", r.notes);
    out
}

// ---------------------------------------------------------------------------
// Integration and linearization on the three-dimensional benchmark orbit

/// ML type-I benchmark: λ = 1 (plus), ω₀ = 1, B = (1, 0.5, 0.25), φ = 0.
pub fn ml1_benchmark() -> (OscillatorModel, ClosedFormOrbit) {
    let model = OscillatorModel::type_a(ml(1.0, Branch::Plus), 3, 1.0).unwrap();
    let orbit = build_orbit(&model, &[1.0, 0.5, 0.25], 0.0).unwrap();
    (model, orbit)
}

/// Shifted benchmark: λ = 0.5 (plus), ξ = (0.5, -1, 0.25), A = (1, 0.5, 0.25).
pub fn shifted_benchmark() -> (OscillatorModel, ClosedFormOrbit) {
    let model = OscillatorModel::type_c(
        PdmProfile::ShiftedMl { lambda: 0.5, branch: Branch::Plus, shift: vec![0.5, -1.0, 0.25] },
        1.0,
    )
    .unwrap();
    let orbit = build_orbit(&model, &[1.0, 0.5, 0.25], 0.0).unwrap();
    (model, orbit)
}

/// Ten periods of the benchmark with RK4 at `T/2000` or RK45 at `rel_tol = 1e-10`.
pub fn benchmark_trajectory(
    model: &OscillatorModel,
    orbit: &ClosedFormOrbit,
    adaptive: bool,
) -> pdm_core::Result<Trajectory> {
    let init = evaluate_orbit(orbit, 0.0)?;
    let t_end = 10.0 * orbit.period();
    let cfg = if adaptive {
        IntegratorConfig::rk45(1e-12, 1e-10, t_end)
    } else {
        IntegratorConfig::rk4(orbit.period() / 2000.0, t_end)
    };
    integrate(model, EomForm::El2Radial, &init, &cfg)
}

/// Largest per-component position error against the closed form.
pub fn position_error(traj: &Trajectory, orbit: &ClosedFormOrbit) -> pdm_core::Result<f64> {
    let mut worst = 0.0_f64;
    for s in &traj.samples {
        let exact = evaluate_orbit(orbit, s.state.t)?;
        for (a, b) in s.state.x.iter().zip(&exact.x) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn integration_check(adaptive: bool, tol: f64) -> VerificationReport {
    let (model, orbit) = ml1_benchmark();
    let name = if adaptive { "rk45" } else { "rk4" };
    match benchmark_trajectory(&model, &orbit, adaptive).and_then(|t| position_error(&t, &orbit).map(|e| (e, t.len())))
    {
        Ok((e, n)) => VerificationReport::from_residuals(name, [e], tol)
            .with_notes(format!("max position error over 10 periods, {n} samples")),
        Err(e) => error_report(name, tol, e),
    }
}

fn energy_drift_check(tol: f64) -> VerificationReport {
    let (model, orbit) = ml1_benchmark();
    let mut residuals = Vec::new();
    for adaptive in [false, true] {
        match benchmark_trajectory(&model, &orbit, adaptive) {
            Ok(t) => residuals.push(t.relative_energy_drift()),
            Err(e) => return error_report("energy_drift", tol, e),
        }
    }
    VerificationReport::from_residuals("energy_drift", residuals, tol)
        .with_notes("relative energy drift along the RK4 and RK45 benchmark runs")
}

/// Observed RK4 order from successive step halvings on two benchmark periods.
pub fn rk4_orders() -> pdm_core::Result<(Vec<f64>, Vec<f64>)> {
    let (model, orbit) = ml1_benchmark();
    let init = evaluate_orbit(&orbit, 0.0)?;
    let mut errors = Vec::new();
    for n in [200, 400, 800, 1600] {
        let cfg = IntegratorConfig::rk4(orbit.period() / n as f64, 2.0 * orbit.period());
        errors.push(position_error(&integrate(&model, EomForm::El2Radial, &init, &cfg)?, &orbit)?);
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((errors, orders))
}

fn order_check(tol: f64) -> VerificationReport {
    match rk4_orders() {
        Ok((errors, orders)) => VerificationReport::from_residuals("rk4_order", orders.iter().map(|p| p - 4.0), tol)
            .with_notes(format!("errors {errors:?}, observed orders {orders:.3?}")),
        Err(e) => error_report("rk4_order", tol, e),
    }
}

/// Maps the RK4 benchmark trajectory and returns the SHO residual and the cosine fit.
pub fn linearize_benchmark(
    family: OrbitFamily,
) -> pdm_core::Result<(OscillatorModel, VerificationReport, pdm_core::transforms::CosineFit)> {
    let (model, orbit) = if family == OrbitFamily::ShiftedMl1 { shifted_benchmark() } else { ml1_benchmark() };
    let traj = benchmark_trajectory(&model, &orbit, false)?;
    let reference = map_trajectory(&traj)?;
    let sho = sho_residual(&reference, model.omega0, 1e-4)?;
    let fit = cosine_fit(&reference)?;
    Ok((model, sho, fit))
}

fn linearization_check(family: OrbitFamily, fit: bool, tol: f64) -> VerificationReport {
    match linearize_benchmark(family) {
        Ok((model, _, f)) if fit => {
            let rel = (f.omega / model.omega0 - 1.0).abs();
            VerificationReport::from_residuals("fit", [rel], tol)
                .with_notes(format!("fitted omega {} vs omega0 {}, fit rms {:.3e}", f.omega, model.omega0, f.rms_error))
        }
        Ok((_, sho, _)) => rms_report("sho", sho, tol).with_notes("pass rule: RMS of dq~/dtau + omega0^2 q"),
        Err(e) => error_report("linearization", tol, e),
    }
}

fn sampled_orbit(model: &OscillatorModel, orbit: &ClosedFormOrbit, times: &[f64]) -> pdm_core::Result<Trajectory> {
    let mut traj = Trajectory::new(model.clone());
    for &t in times {
        let state = evaluate_orbit(orbit, t)?;
        let energy = total_energy(model, &state)?;
        traj.samples.push(Sample { state, tau: 0.0, energy });
    }
    let taus = accumulate_tau(model, &traj)?;
    for (s, tau) in traj.samples.iter_mut().zip(taus) {
        s.tau = tau;
    }
    Ok(traj)
}

fn pl1_linearization_check(tol: f64) -> VerificationReport {
    let model = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon: 1.0 }, 2, 1.0).unwrap();
    let res = build_orbit(&model, &[0.6, 0.8], 0.0)
        .and_then(|orbit| sampled_orbit(&model, &orbit, &admissible_times(&orbit, 2000)))
        .and_then(|traj| map_trajectory(&traj))
        .and_then(|rf| sho_residual(&rf, model.omega0, tol));
    match res {
        Ok(r) => rms_report("sho", r, tol).with_notes("closed-form branch cos > 0.05, tau from f = 1 + upsilon"),
        Err(e) => error_report("sho", tol, e),
    }
}

fn ml2_half_orbit_check(tol: f64) -> VerificationReport {
    let lambda: f64 = 2.0;
    let model = OscillatorModel::type_b(ml(lambda, Branch::Minus), vec![0.6 / lambda.sqrt(), 0.8 / lambda.sqrt()], 1.0)
        .unwrap();
    let res = build_orbit(&model, &[0.3, 0.4], 0.0).and_then(|orbit| {
        let edge = 0.2_f64.acos();
        let times: Vec<f64> = (0..=2000).map(|k| (-edge + 2.0 * edge * k as f64 / 2000.0) / orbit.omega).collect();
        let rf: ReferenceTrajectory = map_trajectory(&sampled_orbit(&model, &orbit, &times)?)?;
        sho_residual(&rf, model.omega0, tol)
    });
    match res {
        Ok(r) => {
            rms_report("half_orbit", r, tol).with_notes("type-II map holds on the half orbit where x points along zeta")
        }
        Err(e) => error_report("half_orbit", tol, e),
    }
}

fn frequency_check(family: OrbitFamily, tol: f64) -> VerificationReport {
    let spec = match family {
        OrbitFamily::Pl1 => SweepSpec::power_law_example(),
        _ => SweepSpec::ml_example(),
    };
    match sweep::run_sweep(&spec, 1) {
        Ok(rows) => {
            let notes = rows
                .iter()
                .map(|r| {
                    format!(
                        "{}={}: measured {:.10} predicted {:.10}",
                        r.parameter_name, r.parameter, r.measured, r.predicted
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            VerificationReport::from_residuals("frequency", rows.iter().map(|r| r.rel_error), tol).with_notes(notes)
        }
        Err(e) => error_report("frequency", tol, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_large_enough() {
        for fam in OrbitFamily::ALL {
            assert!(orbit_grid(fam).len() >= 27, "{fam:?}");
        }
    }

    #[test]
    fn names_are_unique() {
        let names: Vec<String> = registry().into_iter().map(|c| c.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn unknown_override_is_rejected() {
        let mut opts = SuiteOptions::default();
        opts.tolerances.insert("nope".into(), 1.0);
        assert_eq!(run_suite(&opts).unwrap_err(), SuiteError::UnknownCheck("nope".into()));
    }

    #[test]
    fn corrupted_omega_fails_closed_form_checks() {
        let opts = SuiteOptions { family: Some(OrbitFamily::Ml1), omega_corruption: Some(1.01), ..Default::default() };
        let reports = run_suite(&opts).unwrap();
        let cf = reports.iter().find(|r| r.check_name == "closed_form.ML1").unwrap();
        assert!(!cf.passed);
    }
}
