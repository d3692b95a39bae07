use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum StokesError {
    #[error("invalid mesh resolution: {0} cells per side")]
    InvalidResolution(usize),

    #[error("unsupported quadrature order: {0} points per axis")]
    UnsupportedQuadrature(usize),

    #[error("point ({x}, {y}) lies outside the unit square")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("time {t} lies outside [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },

    #[error("invalid time mesh: {0}")]
    InvalidTimeMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("saddle-point factorization failed: {0}")]
    SingularSystem(String),

    #[error("saddle-point residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("time step {interval} failed: {source}")]
    StepFailed {
        interval: usize,
        #[source]
        source: Box<StokesError>,
    },

    #[error("refinement level {level} failed: {source}")]
    LevelFailed {
        level: usize,
        #[source]
        source: Box<StokesError>,
    },
}

impl StokesError {
    /// True when the error originates in a linear solve, possibly wrapped by
    /// time-step or level context.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            StokesError::SingularSystem(_) | StokesError::ResidualTooLarge { .. } => true,
            StokesError::StepFailed { source, .. } | StokesError::LevelFailed { source, .. } => {
                source.is_solver_failure()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, StokesError>;
