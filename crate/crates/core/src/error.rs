use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("demonstration too short: {0} samples, need at least 3")]
    DemoTooShort(usize),

    #[error("timestamps are not strictly increasing at row {0}")]
    NonMonotonicTime(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("episodes are not time-aligned: {0}")]
    Misaligned(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("simulation diverged at t = {t:.3} s (|p| = {norm:.3e} m)")]
    SimulationDiverged { t: f64, norm: f64 },

    #[error("force correction did not converge: {0}")]
    NotConverged(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unsupported document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
