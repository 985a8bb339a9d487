use thiserror::Error;

/// Errors raised across synthesis, verification and simulation.
#[derive(Debug, Error)]
pub enum HinfError {
    #[error("point outside the effective domain of {function}")]
    Domain { function: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("certificate integrity check failed: {0}")]
    Integrity(String),

    #[error("performance ratio undefined: disturbance energy is zero")]
    UndefinedRatio,

    #[error("trajectory aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        #[source]
        source: Box<HinfError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HinfError>;

impl HinfError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HinfError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 infeasible, 3 numerical failure, 4 configuration or usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HinfError::Infeasible(_) | HinfError::Synthesis(_) => 2,
            HinfError::Config(_)
            | HinfError::Json(_)
            | HinfError::Io { .. }
            | HinfError::Integrity(_)
            | HinfError::Dimension(_) => 4,
            HinfError::Aborted { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
