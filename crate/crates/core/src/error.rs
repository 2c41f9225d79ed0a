use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("wavenumber k = 0 is not a simulated mode")]
    ZeroWavenumber,

    #[error("empty mode set")]
    EmptyModes,

    #[error("degenerate mode k = {0}: a_k + k = 0, no resonance")]
    DegenerateMode(i32),

    #[error("variance bound degenerate: gamma_T = gamma_v")]
    BoundDegenerate,

    #[error("potential is only defined for the gradient case (A = B = 0)")]
    NotGradient,

    #[error("stationary density not integrable: {0}")]
    NotIntegrable(String),

    #[error("degenerate mixture: conditional variance vanishes")]
    DegenerateMixture,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("not enough samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("zero variance: skewness and kurtosis undefined")]
    ZeroVariance,

    #[error("path mismatch: {0}")]
    PathMismatch(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
