use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-uniform day spacing at line {line} (expected 2 days)")]
    NonUniformSpacing { line: usize },
    #[error("negative count at line {line}")]
    NegativeCount { line: usize },
    #[error("series has {len} observations, need at least 9")]
    SeriesTooShort { len: usize },
    #[error("step {delta} days does not divide {what} of {span} days")]
    IndivisibleLag { delta: u32, span: u32, what: &'static str },
    #[error("initialization window does not cover lag {tau} days")]
    WindowTooShort { tau: u32 },
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("measurement overdispersion sigma_y must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("particle depletion at observation {step} (iteration {iteration}); log-likelihood through previous step {loglik_so_far}")]
    ParticleDepletion {
        step: usize,
        iteration: usize,
        loglik_so_far: f64,
    },
    #[error("all weights are degenerate")]
    AllWeightsDegenerate,
    #[error("parameter swarm diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("zero count at index {index}; log transform undefined")]
    ZeroCount { index: usize },
    #[error("AR polynomial is not stationary")]
    NonStationary,
    #[error("MA polynomial is not invertible")]
    NonInvertible,
    #[error("optimization failed: {0}")]
    OptimFailed(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
