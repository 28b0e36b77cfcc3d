use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The failure stage of an observation lies before the first stage that
    /// accumulates exposure, so its likelihood contribution is zero.
    #[error("observation {index} fails in stage {stage}, before the first effective stage {first}")]
    InfeasibleObservation { index: usize, stage: usize, first: usize },

    /// A logarithm or negative power hit a zero argument.
    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("series did not converge after {stages} stages (partial sum {partial:e})")]
    SeriesTruncation { stages: usize, partial: f64 },

    #[error("nonlinear solve failed: {0}")]
    Solver(String),

    #[error("{what} at line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
