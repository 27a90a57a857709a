use thiserror::Error;

/// Errors raised by the library. The CLI maps `Config` to exit code 1 and everything else
/// to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate perforation: {0}")]
    DegeneratePerforation(String),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("iterative solver hit the cap of {iterations} iterations (residual history {history:?})")]
    Convergence { iterations: usize, history: Vec<f64> },
    #[error("compatibility violation: {0}")]
    Compatibility(String),
    #[error("fixed-point iteration is not contracting (ratio {ratio:.3} in window {window})")]
    NonContraction { window: usize, ratio: f64 },
    #[error("contraction mismatch: {0}")]
    Shape(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
