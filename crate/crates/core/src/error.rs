use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("rank {k} out of range (max {max})")]
    RankOutOfRange { k: usize, max: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series of length {len} too short for window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("expected {expected} channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error("trace of length {len} shorter than required {required}")]
    TraceTooShort { len: usize, required: usize },
    #[error("empty partition: {0}")]
    EmptyPartition(&'static str),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
    #[error("GP head factor is stale; refresh required")]
    StaleFactor,
    #[error("model state mismatch: {0}")]
    StateMismatch(String),
    #[error("ensemble aborted: only {survivors} of {total} members survived")]
    EnsembleAborted { survivors: usize, total: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
