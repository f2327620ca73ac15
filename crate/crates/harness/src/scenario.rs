//! JSON scenario files.
//!
//! ```json
//! {
//!   "model": {
//!     "family": "type_a",
//!     "profile": { "kind": "mathews_lakshmanan", "lambda": 1.0, "branch": "plus" },
//!     "dim": 3,
//!     "omega0": 1.0
//!   },
//!   "eom_form": "el2_radial",
//!   "initial": { "from_closed_form": { "amplitudes": [1.0, 0.5, 0.25], "phase": 0.0 } },
//!   "integrator": { "method": "RK4_FIXED", "dt": 0.004, "t_end": 88.8 },
//!   "checks": ["energy_drift", "closed_form_error"],
//!   "output": { "trajectory_csv": "trajectory.csv" }
//! }
//! ```
//!
//! Unknown fields are rejected everywhere. Optional model fields: `m0` (default 1),
//! `zeta` (type B), `imaginary_zeta`. `dim` may be omitted when `zeta` or the
//! profile's `shift` fixes it. `initial` may instead be
//! `{ "explicit": { "x": [...], "v": [...] } }`. Integrators: `RK4_FIXED` with `dt`,
//! or `RK45_ADAPTIVE` with `abs_tol` and `rel_tol`; both take `t_end`, and optionally
//! `max_steps` and `record_every`.

use std::fmt;
use std::path::Path;

use pdm_core::{
    build_orbit, evaluate_orbit, ClosedFormOrbit, EomForm, Family, IntegratorConfig, Method, OscillatorModel,
    PdmProfile, PhaseState,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub eom_form: EomForm,
    pub initial: InitialSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub checks: Vec<ScenarioCheck>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub profile: PdmProfile,
    #[serde(default)]
    pub dim: Option<usize>,
    pub omega0: f64,
    #[serde(default = "one")]
    pub m0: f64,
    #[serde(default)]
    pub zeta: Vec<f64>,
    #[serde(default)]
    pub imaginary_zeta: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        x: Vec<f64>,
        v: Vec<f64>,
        #[serde(default)]
        t: f64,
    },
    FromClosedForm {
        amplitudes: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum IntegratorSpec {
    Rk4Fixed {
        dt: f64,
        t_end: f64,
        #[serde(default = "default_max_steps")]
        max_steps: usize,
        #[serde(default = "default_record_every")]
        record_every: usize,
    },
    Rk45Adaptive {
        abs_tol: f64,
        rel_tol: f64,
        t_end: f64,
        #[serde(default = "default_max_steps")]
        max_steps: usize,
        #[serde(default = "default_record_every")]
        record_every: usize,
    },
}

fn default_max_steps() -> usize {
    10_000_000
}

fn default_record_every() -> usize {
    1
}

impl IntegratorSpec {
    pub fn config(&self) -> IntegratorConfig {
        match *self {
            IntegratorSpec::Rk4Fixed { dt, t_end, max_steps, record_every } => {
                IntegratorConfig { method: Method::Rk4 { dt }, t_end, max_steps, record_every }
            }
            IntegratorSpec::Rk45Adaptive { abs_tol, rel_tol, t_end, max_steps, record_every } => {
                IntegratorConfig { method: Method::Rk45 { abs_tol, rel_tol }, t_end, max_steps, record_every }
            }
        }
    }
}

/// Checks a scenario may request on its own trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCheck {
    /// Relative drift of the recorded energy.
    EnergyDrift,
    /// Position error against the closed-form orbit (needs `from_closed_form`).
    ClosedFormError,
    /// `dq̃/dτ + ω₀² q` along the mapped trajectory.
    ShoResidual,
    /// Fitted reference frequency against ω₀.
    CosineFit,
    /// `d q/dt = √m f ẋ` along the trajectory.
    FConsistency,
}

impl ScenarioCheck {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioCheck::EnergyDrift => "energy_drift",
            ScenarioCheck::ClosedFormError => "closed_form_error",
            ScenarioCheck::ShoResidual => "sho_residual",
            ScenarioCheck::CosineFit => "cosine_fit",
            ScenarioCheck::FConsistency => "f_consistency",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            ScenarioCheck::EnergyDrift => 1e-8,
            ScenarioCheck::ClosedFormError => 1e-6,
            ScenarioCheck::ShoResidual => 1e-4,
            ScenarioCheck::CosineFit => 1e-6,
            ScenarioCheck::FConsistency => 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_trajectory_csv")]
    pub trajectory_csv: String,
    #[serde(default = "default_summary_json")]
    pub summary_json: String,
    #[serde(default = "default_reference_csv")]
    pub reference_csv: String,
}

fn default_trajectory_csv() -> String {
    "trajectory.csv".into()
}

fn default_summary_json() -> String {
    "summary.json".into()
}

fn default_reference_csv() -> String {
    "reference.csv".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trajectory_csv: default_trajectory_csv(),
            summary_json: default_summary_json(),
            reference_csv: default_reference_csv(),
        }
    }
}

/// Parse or resolution failure, with the location of the offending input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source_name)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn plain(source_name: &str, message: impl Into<String>) -> Self {
        ConfigError { source_name: source_name.into(), line: None, column: None, field: None, message: message.into() }
    }

    fn at_field(source_name: &str, field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            source_name: source_name.into(),
            line: None,
            column: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

/// Deserializes strict JSON, reporting the field path and line/column of the first error.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, source_name: &str) -> Result<T, ConfigError> {
    let to_config = |e: serde_json::Error, path: Option<String>| ConfigError {
        source_name: source_name.into(),
        line: Some(e.line()),
        column: Some(e.column()),
        field: path.filter(|p| p != "." && !p.is_empty()),
        message: e.to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        to_config(err.into_inner(), Some(path))
    })?;
    de.end().map_err(|e| to_config(e, None))?;
    Ok(value)
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::plain(&name, format!("cannot read: {e}")))?;
    parse_json(&text, &name)
}

/// A scenario resolved into core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: OscillatorModel,
    pub form: EomForm,
    pub initial: PhaseState,
    pub orbit: Option<ClosedFormOrbit>,
    pub config: IntegratorConfig,
}

impl ModelSpec {
    pub fn build(&self, source_name: &str) -> Result<OscillatorModel, ConfigError> {
        let err = |e: pdm_core::Error| ConfigError::at_field(source_name, "model", e.to_string());
        let mut model = match self.family {
            Family::TypeA => {
                let dim =
                    self.dim.ok_or_else(|| ConfigError::at_field(source_name, "model.dim", "required for type_a"))?;
                OscillatorModel::type_a(self.profile.clone(), dim, self.omega0).map_err(err)?
            }
            Family::TypeB => {
                OscillatorModel::type_b(self.profile.clone(), self.zeta.clone(), self.omega0).map_err(err)?
            }
            Family::TypeC => OscillatorModel::type_c(self.profile.clone(), self.omega0).map_err(err)?,
        };
        if let Some(dim) = self.dim {
            if dim != model.dim {
                return Err(ConfigError::at_field(
                    source_name,
                    "model.dim",
                    format!("dim {dim} disagrees with the vectors given ({})", model.dim),
                ));
            }
        }
        if self.family != Family::TypeB && !self.zeta.is_empty() {
            return Err(ConfigError::at_field(source_name, "model.zeta", "only type_b models take zeta"));
        }
        if self.imaginary_zeta {
            model = model.with_imaginary_zeta().map_err(err)?;
        }
        model.with_m0(self.m0).map_err(err)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        load_json(path)
    }

    pub fn resolve(&self, source_name: &str) -> Result<Resolved, ConfigError> {
        let model = self.model.build(source_name)?;
        let (initial, orbit) = match &self.initial {
            InitialSpec::Explicit { x, v, t } => {
                for (name, vec) in [("initial.explicit.x", x), ("initial.explicit.v", v)] {
                    if vec.len() != model.dim {
                        return Err(ConfigError::at_field(
                            source_name,
                            name,
                            format!("expected {} components, found {}", model.dim, vec.len()),
                        ));
                    }
                }
                (PhaseState::new(*t, x.clone(), v.clone()), None)
            }
            InitialSpec::FromClosedForm { amplitudes, phase } => {
                let field = "initial.from_closed_form";
                let orbit = build_orbit(&model, amplitudes, *phase)
                    .map_err(|e| ConfigError::at_field(source_name, field, e.to_string()))?;
                let start = evaluate_orbit(&orbit, 0.0)
                    .map_err(|e| ConfigError::at_field(source_name, field, e.to_string()))?;
                (start, Some(orbit))
            }
        };
        let config = self.integrator.config();
        config.validate(initial.t).map_err(|e| ConfigError::at_field(source_name, "integrator", e.to_string()))?;
        if self.checks.contains(&ScenarioCheck::ClosedFormError) && orbit.is_none() {
            return Err(ConfigError::at_field(
                source_name,
                "checks",
                "closed_form_error needs a from_closed_form initial state",
            ));
        }
        Ok(Resolved { model, form: self.eom_form, initial, orbit, config })
    }
}
