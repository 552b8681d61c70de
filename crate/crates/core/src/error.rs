use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("fields or potentials live on different grids")]
    GridMismatch,

    #[error("unknown splitting scheme `{0}` (expected one of strang, rkn74, rkn116)")]
    UnknownSplitting(String),

    #[error("unknown CFQM scheme `{0}` (expected one of cf2, cf4, cf4af, cf6af)")]
    UnknownCfqm(String),

    #[error("invalid method descriptor `{0}` (expected <cfqm>+<splitting> or bbk+<splitting>)")]
    InvalidMethod(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {stage} of the step starting at t = {t0}")]
    NonFinite { stage: String, t0: f64 },

    #[error("dense operator too large: {0} unknowns (limit {1})")]
    TooLarge(usize, usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("reference solution unreliable: {0}")]
    ReferenceUnstable(String),

    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("bad field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
