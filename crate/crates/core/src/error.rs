use thiserror::Error;

use crate::model::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("outside the mass domain: {0}")]
    Domain(String),

    #[error("mass {0:e} is too close to zero")]
    SingularMass(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("closed-form constraint violated: {0}")]
    Constraint(String),

    #[error("fractional power of a non-positive cosine ({0:e})")]
    BranchDomain(f64),

    #[error("transformation not valid here: {0}")]
    Validity(String),

    #[error("re-scaled time is not strictly monotone at sample {0}")]
    NonMonotoneTau(usize),

    #[error("cosine fit failed: {0}")]
    FitDiverged(String),

    #[error("need at least two crossings, found {0}")]
    InsufficientCrossings(usize),

    #[error("initial state is not collinear (defect {0:e}); reduced forms need r parallel to v")]
    Collinearity(f64),

    #[error("invalid integrator configuration: {0}")]
    Config(String),

    #[error("trajectory left the mass domain at t = {t}: {reason}")]
    DomainExit { t: f64, reason: String, partial: Box<Trajectory> },

    #[error("step limit of {limit} reached at t = {t}")]
    StepLimit { limit: usize, t: f64, partial: Box<Trajectory> },
}

impl Error {
    /// Samples integrated before the run stopped, when the error came from an integration.
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            Error::DomainExit { partial, .. } | Error::StepLimit { partial, .. } => Some(partial),
            _ => None,
        }
    }
}
