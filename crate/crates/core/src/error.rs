use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("quadrature did not reach tolerance (achieved residual {residual:e})")]
    Quadrature { residual: f64 },
    #[error("sampler error: {0}")]
    Sampler(String),
    #[error("solver did not converge after {iterations} iterations (residuals {history:?})")]
    Solver { iterations: usize, history: Vec<f64> },
    #[error("spectral truncation bound {bound:e} exceeds tolerance {tol:e}; increase the number of modes")]
    Truncation { bound: f64, tol: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
