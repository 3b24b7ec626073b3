//! Command implementations behind the `schurflow` binary.

pub mod commands;
pub mod output;
pub mod sweep;

use serde::Serialize;

use schurflow::krylov::NormKind;
use schurflow::stokes::{InnerPrec, SchurConfig};

/// Command-line overrides applied on top of a tolerance profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverOverrides {
    pub eps_s: Option<f64>,
    pub eps_a: Option<f64>,
    pub eps_shat: Option<f64>,
    pub norm: Option<NormKind>,
    pub max_iter: Option<usize>,
    pub inner: Option<InnerPrec>,
}

impl SolverOverrides {
    pub fn apply(&self, mut cfg: SchurConfig) -> SchurConfig {
        if let Some(v) = self.eps_s {
            cfg.eps_s = v;
        }
        if let Some(v) = self.eps_a {
            cfg.eps_a = v;
        }
        if let Some(v) = self.eps_shat {
            cfg.eps_shat = v;
        }
        if let Some(v) = self.norm {
            cfg.outer_norm = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_outer = v;
        }
        if let Some(v) = self.inner {
            cfg.inner_prec = v;
        }
        cfg
    }
}
