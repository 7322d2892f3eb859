use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input")]
    EmptyInput,

    #[error("need autocovariances up to lag {needed}, have {available}")]
    InsufficientLags { needed: usize, available: usize },

    #[error("Levinson recursion broke down at order {order} (prediction variance {variance:e})")]
    Singular { order: usize, variance: f64 },

    #[error("series did not converge after {terms} terms")]
    NonConvergence { terms: usize },

    #[error("singular least-squares design at order {0}")]
    SingularDesign(usize),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("order mismatch: fit has order {fit}, reference has order {truth}")]
    OrderMismatch { fit: usize, truth: usize },

    #[error("invalid bandwidth {bandwidth} for {frequencies} Fourier frequencies")]
    Bandwidth { bandwidth: usize, frequencies: usize },

    #[error("zero periodogram ordinate at j = {0}")]
    ZeroOrdinate(usize),

    #[error("need at least {needed} draws, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("ragged draw array: row {row} has {len} entries, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },

    #[error("expansion not valid for d = {0} (requires d < 0.1)")]
    Validity(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pre-filter d = {d} outside admissible window ({lower}, {upper})")]
    Admissibility { d: f64, lower: f64, upper: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replication {index} (stream {stream:#x}) failed: {source}")]
    Replication {
        index: usize,
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_) | Error::Csv(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
