use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Syntax error in a model or scenario file.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The model parsed but violates a structural invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("undeclared event `{name}`{}", at_time(*t))]
    UndeclaredEvent { name: String, t: Option<f64> },

    #[error("undeclared parameter `{name}`{}", at_time(*t))]
    UndeclaredParameter { name: String, t: Option<f64> },

    #[error("trace line {line}: {message}")]
    InvalidTrace { line: usize, message: String },

    #[error("sync event not found")]
    SyncNotFound,

    #[error("measurement line {line}: {message}")]
    InvalidMeasurement { line: usize, message: String },

    #[error("no samples")]
    NoSamples,

    #[error("sync spike not found (threshold {threshold} W)")]
    SpikeNotFound { threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("insufficient samples in window [{a}, {b}]: {found} found, at least 2 required")]
    InsufficientSamples { a: f64, b: f64, found: usize },

    #[error("aligned measurements do not overlap the modeled profile")]
    NoOverlap,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn at_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t={t}"),
        None => String::new(),
    }
}
