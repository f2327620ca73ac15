//! Parameter sweeps measuring oscillation frequencies and energies by integration.
//!
//! Mathews-Lakshmanan grids start at the turning point and time mean crossings
//! over several periods. Power-law grids reach the origin after a quarter period
//! and stop there, so the quarter period is taken from a Newton extrapolation
//! of `s^(υ+1)` (linear in time near the collapse) to zero.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io;
use std::path::Path;

use pdm_core::{
    build_orbit, evaluate_orbit, integrate, measure_period, Branch, EomForm, Error, IntegratorConfig, OrbitFamily,
    OscillatorModel, PdmProfile, Trajectory,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{write_table, Cell};

fn plus() -> Branch {
    Branch::Plus
}
fn one() -> f64 {
    1.0
}
fn default_form() -> EomForm {
    EomForm::El2Direct
}
fn default_periods() -> f64 {
    10.0
}
fn default_rel_tol() -> f64 {
    1e-12
}
fn default_csv() -> String {
    "sweep.csv".into()
}

/// Sweep description. Mathews-Lakshmanan families read `lambda`, the power law reads `upsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: OrbitFamily,
    #[serde(default = "plus")]
    pub branch: Branch,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub upsilon: Vec<f64>,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
    pub amplitudes: Vec<Vec<f64>>,
    pub omega0: Vec<f64>,
    #[serde(default = "default_form")]
    pub eom_form: EomForm,
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_csv")]
    pub output_csv: String,
}

impl SweepSpec {
    fn base(family: OrbitFamily) -> Self {
        SweepSpec {
            family,
            branch: Branch::Plus,
            lambda: Vec::new(),
            upsilon: Vec::new(),
            k: 1.0,
            shift: None,
            amplitudes: vec![vec![1.0]],
            omega0: vec![1.0],
            eom_form: default_form(),
            periods: default_periods(),
            rel_tol: default_rel_tol(),
            output_csv: default_csv(),
        }
    }

    /// λ ∈ {0, 0.5, 1}, B = (1), ω₀ = 1, plus branch.
    pub fn ml_example() -> Self {
        SweepSpec { lambda: vec![0.0, 0.5, 1.0], ..Self::base(OrbitFamily::Ml1) }
    }

    /// υ ∈ {1, 2}, k = 1, B = (1), ω₀ = 1.
    pub fn power_law_example() -> Self {
        SweepSpec { upsilon: vec![1.0, 2.0], ..Self::base(OrbitFamily::Pl1) }
    }

    fn parameter_name(&self) -> &'static str {
        if self.family == OrbitFamily::Pl1 {
            "upsilon"
        } else {
            "lambda"
        }
    }

    /// Grid points in row-major order: parameter, amplitudes, ω₀.
    pub fn points(&self) -> Result<Vec<GridPoint>, SweepError> {
        let params = match self.family {
            OrbitFamily::Ml1 | OrbitFamily::ShiftedMl1 => &self.lambda,
            OrbitFamily::Pl1 => &self.upsilon,
            other => return Err(SweepError::UnsupportedFamily(other.name())),
        };
        if self.family == OrbitFamily::ShiftedMl1 && self.shift.is_none() {
            return Err(SweepError::Config("SHIFTED_ML1 sweeps need `shift`".into()));
        }
        let valid = self.periods >= 1.0 && self.rel_tol > 0.0;
        if !valid {
            return Err(SweepError::Config("`periods` must be at least 1 and `rel_tol` positive".into()));
        }
        let mut out = Vec::new();
        for &p in params {
            for amps in &self.amplitudes {
                for &w in &self.omega0 {
                    out.push(GridPoint { index: out.len(), parameter: p, amplitudes: amps.clone(), omega0: w });
                }
            }
        }
        if out.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        Ok(out)
    }

    fn model(&self, point: &GridPoint) -> pdm_core::Result<OscillatorModel> {
        let dim = point.amplitudes.len();
        match self.family {
            OrbitFamily::Pl1 => {
                OscillatorModel::type_a(PdmProfile::PowerLaw { k: self.k, upsilon: point.parameter }, dim, point.omega0)
            }
            OrbitFamily::ShiftedMl1 => OscillatorModel::type_c(
                PdmProfile::ShiftedMl {
                    lambda: point.parameter,
                    branch: self.branch,
                    shift: self.shift.clone().unwrap_or_default(),
                },
                point.omega0,
            ),
            _ => OscillatorModel::type_a(
                PdmProfile::MathewsLakshmanan { lambda: point.parameter, branch: self.branch },
                dim,
                point.omega0,
            ),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("family {0} cannot be swept")]
    UnsupportedFamily(&'static str),
    #[error("{0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub parameter: f64,
    pub amplitudes: Vec<f64>,
    pub omega0: f64,
}

/// One sweep row. `rel_error` compares Ω² for Mathews-Lakshmanan grids and Ω for the power law.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub parameter_name: &'static str,
    pub parameter: f64,
    pub omega0: f64,
    pub amplitude_sum_sq: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_error: f64,
    pub energy: f64,
    pub predicted_energy: f64,
    pub status: String,
}

impl SweepRow {
    pub fn completed(&self) -> bool {
        self.status == "ok"
    }
}

/// Runs every grid point on a pool of `jobs` workers; rows keep grid order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| points.par_iter().map(|p| run_point(spec, p)).collect()))
}

fn run_point(spec: &SweepSpec, point: &GridPoint) -> SweepRow {
    let s: f64 = point.amplitudes.iter().map(|b| b * b).sum();
    let mut row = SweepRow {
        index: point.index,
        parameter_name: spec.parameter_name(),
        parameter: point.parameter,
        omega0: point.omega0,
        amplitude_sum_sq: s,
        measured: f64::NAN,
        predicted: f64::NAN,
        rel_error: f64::NAN,
        energy: f64::NAN,
        predicted_energy: f64::NAN,
        status: String::new(),
    };
    let outcome = (|| -> pdm_core::Result<()> {
        let model = spec.model(point)?;
        let orbit = build_orbit(&model, &point.amplitudes, 0.0)?;
        let start = evaluate_orbit(&orbit, 0.0)?;
        row.predicted_energy = orbit.energy;
        row.energy = pdm_core::total_energy(&model, &start)?;
        if spec.family == OrbitFamily::Pl1 {
            let t_end = 4.0 * TAU / point.omega0;
            let cfg = IntegratorConfig::rk45(spec.rel_tol * 1e-2, spec.rel_tol, t_end);
            let omega = match integrate(&model, spec.eom_form, &start, &cfg) {
                Ok(_) => return Err(Error::Validity("trajectory never reached the origin".into())),
                Err(e @ Error::DomainExit { .. }) => {
                    let traj = e.partial_trajectory().expect("domain exit carries a trajectory");
                    FRAC_PI_2 / collapse_time(traj, &point.amplitudes, point.parameter)?
                }
                Err(e) => return Err(e),
            };
            row.measured = omega;
            row.predicted = orbit.omega;
            row.rel_error = (omega / orbit.omega - 1.0).abs();
        } else {
            let lambda = point.parameter.abs();
            let t_end = spec.periods * TAU / point.omega0 * (1.0 + lambda * s).sqrt();
            let cfg = IntegratorConfig::rk45(spec.rel_tol * 1e-2, spec.rel_tol, t_end);
            let traj = integrate(&model, spec.eom_form, &start, &cfg)?;
            let axis = dominant_axis(&point.amplitudes);
            let omega = TAU / measure_period(&traj, axis)?;
            row.measured = omega;
            row.predicted = orbit.omega;
            row.rel_error = (omega * omega / (orbit.omega * orbit.omega) - 1.0).abs();
        }
        Ok(())
    })();
    row.status = match outcome {
        Ok(()) => "ok".into(),
        Err(Error::DomainExit { t, reason, .. }) => format!("domain exit at t={t}: {reason}"),
        Err(e) => format!("error: {e}"),
    };
    row
}

fn dominant_axis(amps: &[f64]) -> usize {
    (0..amps.len()).fold(0, |best, i| if amps[i].abs() > amps[best].abs() { i } else { best })
}

/// Time at which `s^(υ+1)` reaches zero, from the last recorded sample heading inwards.
fn collapse_time(traj: &Trajectory, amplitudes: &[f64], upsilon: f64) -> pdm_core::Result<f64> {
    let norm = amplitudes.iter().map(|b| b * b).sum::<f64>().sqrt();
    let t0 = traj.samples.first().map(|s| s.state.t).unwrap_or(0.0);
    let sample = traj
        .samples
        .iter()
        .rev()
        .map(|smp| {
            let s: f64 = smp.state.x.iter().zip(amplitudes).map(|(x, b)| x * b / norm).sum();
            let sd: f64 = smp.state.v.iter().zip(amplitudes).map(|(v, b)| v * b / norm).sum();
            (smp.state.t, s, sd)
        })
        .find(|&(_, s, sd)| s > 0.0 && sd < 0.0)
        .ok_or_else(|| Error::Validity("no inward-moving sample before the collapse".into()))?;
    let (t, s, sd) = sample;
    let w = s.powf(upsilon + 1.0);
    let dw = (upsilon + 1.0) * s.powf(upsilon) * sd;
    Ok(t - w / dw - t0)
}

pub const SWEEP_HEADER: [&str; 12] = [
    "index",
    "parameter",
    "value",
    "omega0",
    "sum_b_sq",
    "omega",
    "omega_sq",
    "predicted_omega_sq",
    "rel_error",
    "energy",
    "predicted_energy",
    "status",
];

pub fn write_sweep<W: io::Write>(out: W, rows: &[SweepRow]) -> io::Result<()> {
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.index),
                Cell::Text(r.parameter_name.into()),
                Cell::Num(r.parameter),
                Cell::Num(r.omega0),
                Cell::Num(r.amplitude_sum_sq),
                Cell::Num(r.measured),
                Cell::Num(r.measured * r.measured),
                Cell::Num(r.predicted * r.predicted),
                Cell::Num(r.rel_error),
                Cell::Num(r.energy),
                Cell::Num(r.predicted_energy),
                Cell::Text(r.status.clone()),
            ]
        })
        .collect();
    write_table(out, &SWEEP_HEADER, &cells)
}

pub fn write_sweep_file(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    write_sweep(std::fs::File::create(path)?, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_an_error() {
        let spec = SweepSpec { lambda: vec![], ..SweepSpec::ml_example() };
        assert_eq!(run_sweep(&spec, 1).unwrap_err(), SweepError::EmptyGrid);
    }

    #[test]
    fn type_two_family_is_rejected() {
        let spec = SweepSpec { family: OrbitFamily::Ml2, ..SweepSpec::ml_example() };
        assert!(matches!(spec.points(), Err(SweepError::UnsupportedFamily("ML2"))));
    }

    #[test]
    fn out_of_domain_points_are_recorded() {
        let spec = SweepSpec { branch: Branch::Minus, lambda: vec![0.5, 2.0], ..SweepSpec::ml_example() };
        let rows = run_sweep(&spec, 2).unwrap();
        assert!(rows[0].completed());
        assert!(rows[1].status.starts_with("error"), "{}", rows[1].status);
    }
}
