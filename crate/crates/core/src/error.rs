use thiserror::Error;

/// Errors raised by geometry handling, assembly, and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty fluid domain")]
    EmptyFluid,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("velocity operator singular: no no-slip boundary")]
    NoSolid,

    #[error("fluid domain has {0} connected components; call enforce_connectivity first")]
    Disconnected(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operator not SPD on subspace: curvature {curvature:e} at iteration {iter}")]
    NotSpd { iter: usize, curvature: f64 },

    #[error("non-finite value at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("{what} did not converge in {iters} iterations (relative residual {residual:e})")]
    InnerNotConverged {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("eigensolver did not converge after {0} sweeps")]
    EigNotConverged(usize),

    #[error("dense cap exceeded: {size} pressure unknowns > cap {cap}; use a smaller geometry")]
    DenseCapExceeded { size: usize, cap: usize },

    #[error("{0}")]
    Other(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
