//! Preconditioned conjugate gradients with optional constant-nullspace
//! projection, plus condition estimates from the CG coefficients.

mod lanczos;
mod pcg;
mod precond;

pub use lanczos::{lanczos_condition_estimate, lanczos_tridiagonal, ConditionEstimate};
pub use pcg::{pcg, pcg_with, NormKind, PcgConfig, PcgResult, PcgStep};
pub use precond::{Identity, Jacobi, Ssor};
