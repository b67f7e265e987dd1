//! Error types shared across the engine.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("degenerate fan counts: fan_in={fan_in}, fan_out={fan_out}")]
    DegenerateFan { fan_in: usize, fan_out: usize },

    #[error("invalid range: lo={lo} must be < hi={hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("genome has no weight parameters")]
    EmptyGenome,

    #[error("genome has no fitness; train it before using it as a crossover parent")]
    MissingFitness,

    /// The chosen mutation kind has no valid application site on this
    /// genome; the caller should redraw another kind.
    #[error("mutation {0} is not applicable to this genome")]
    InapplicableMutation(&'static str),

    #[error("genome parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("column {0:?} is constant; enable drop_constant_columns or remove it")]
    DegenerateColumn(String),

    #[error("numerical divergence at timestep {step}")]
    NumericalDivergence { step: usize },

    #[error("engine not seeded: no island has any member")]
    EngineNotSeeded,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
