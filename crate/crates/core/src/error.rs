use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("fixed-point solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("simulation blew up at step {step} (t = {t} s): non-finite state")]
    SimulationBlowUp { step: usize, t: f64 },

    #[error("controller failure at step {step}: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown preset `{name}`; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("invalid scenario path `{0}`")]
    InvalidPath(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ (Error::SimulationBlowUp { .. } | Error::StepFailure { .. }) => e,
            e => Error::StepFailure {
                step,
                source: Box::new(e),
            },
        }
    }
}
