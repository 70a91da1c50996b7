use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unstable: spectral radius {rho:.6} (context: {context})")]
    Unstable { rho: f64, context: String },
    #[error("ill-conditioned least squares (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("no convergence after {iters} iterations: {context}")]
    NoConvergence { iters: usize, context: String },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
