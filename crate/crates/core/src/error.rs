use thiserror::Error;

/// Errors produced anywhere in the annealing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter {index} = {value} lies outside [{lo}, {hi}]")]
    ParamOutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{n_qubits} qubits exceeds the cap of {cap}")]
    Resource { n_qubits: usize, cap: usize },

    #[error(
        "integration did not converge after {refinements} refinements \
         (last final energies {previous} and {last})"
    )]
    IntegrationFailure { refinements: usize, previous: f64, last: f64 },

    #[error("eigensolver did not converge, residual norms {residuals:?}")]
    Eigensolver { residuals: Vec<f64> },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("singular schedule: {0}")]
    SingularSchedule(String),

    #[error("divergent limit: {0}")]
    DivergentLimit(String),

    #[error("degenerate dynamics: {0}")]
    DegenerateDynamics(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<toml::de::Error> for Error {
    fn from(err: toml::de::Error) -> Self {
        Error::Config(err.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(err: toml::ser::Error) -> Self {
        Error::Config(err.to_string())
    }
}
