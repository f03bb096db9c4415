use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-positive density {rho:e}")]
    NonPositiveDensity { rho: f64 },

    #[error("non-positive temperature {temperature:e}")]
    NonPositiveTemperature { temperature: f64 },

    #[error("inadmissible state at element {element}, node {node}: {source}")]
    Inadmissible {
        element: usize,
        node: usize,
        #[source]
        source: Box<SolverError>,
    },

    #[error("invalid gas parameters: {0}")]
    InvalidGas(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("wall velocity is not tangent to the wall: |U.n| = {normal_component:e}")]
    WallVelocityNotTangent { normal_component: f64 },

    #[error("direction {0} out of range (expected 0, 1 or 2)")]
    Direction(usize),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("mismatched interface faces: {0}")]
    MismatchedFaces(String),

    #[error("step size {step:e} fell below the minimum {min:e} at t = {time}")]
    StepUnderflow { step: f64, min: f64, time: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed field file: {reason}")]
    FieldFormat { path: PathBuf, reason: String },
}

impl SolverError {
    /// True when the error signals loss of positivity of density or temperature.
    pub fn is_admissibility(&self) -> bool {
        match self {
            SolverError::NonPositiveDensity { .. } | SolverError::NonPositiveTemperature { .. } => {
                true
            }
            SolverError::Inadmissible { .. } => true,
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SolverError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
