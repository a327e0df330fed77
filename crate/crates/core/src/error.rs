use thiserror::Error;

/// Errors raised when constructing or validating controller inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid UAV parameter `{name}` = {value}: must be finite and strictly positive")]
    InvalidParam { name: &'static str, value: f64 },

    #[error("invalid gain `{name}` = {value}: {requirement}")]
    InvalidGain {
        name: String,
        value: f64,
        requirement: &'static str,
    },

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("invalid constraint bound `{name}` = {value}: must be > 0 (or +inf)")]
    InvalidBound { name: String, value: f64 },

    #[error("length mismatch: expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty trajectory log")]
    EmptyLog,

    #[error("p-norm requires p >= 1, got {0}")]
    InvalidNormOrder(f64),

    #[error("malformed trajectory CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
