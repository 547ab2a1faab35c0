use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters or inputs that can never produce a valid run.
    #[error("configuration error: {0}")]
    Config(String),

    /// A weak-measurement outcome whose Kraus weight vanished on the grid.
    #[error("measurement fault: post-measurement norm {norm:e} for outcome {q_raw} ({observable})")]
    Measurement {
        norm: f64,
        q_raw: f64,
        observable: &'static str,
    },

    /// Probability reached the edge of the periodic grid.
    #[error("boundary leakage: weight {weight:e} in the edge cells")]
    Leakage { weight: f64 },

    #[error("estimator fault: {0}")]
    Estimator(String),

    #[error("gain synthesis did not converge after {iterations} iterations (residual {residual:e})")]
    Gain { iterations: usize, residual: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("artifact parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by invalid user input rather than a runtime fault.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}
