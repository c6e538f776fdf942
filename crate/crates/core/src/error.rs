use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite sample at x = {0}")]
    NonFiniteSample(f64),

    #[error("approximation did not resolve on [{lo}, {hi}] within the recursion depth cap")]
    DepthExceeded { lo: f64, hi: f64 },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("eigensolve did not converge")]
    EigNoConvergence,

    #[error("matrix must be square and upper Hessenberg")]
    NotHessenberg,

    #[error("eigenfunction overflow")]
    EigenfunctionOverflow,

    #[error("ill-conditioned covariance")]
    IllConditioned,

    #[error("no converged start")]
    NoConvergedStart,

    #[error("point outside the domain in dimension {dim}: {value} not in [{lo}, {hi}]")]
    OutOfDomain { dim: usize, value: f64, lo: f64, hi: f64 },

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
