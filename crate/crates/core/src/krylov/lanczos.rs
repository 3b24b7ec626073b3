use serde::{Deserialize, Serialize};

use crate::eig::{jacobi_eigenvalues, tridiagonal_eigenvalues};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Extreme eigenvalue estimates of the preconditioned operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond: f64,
}

/// The Lanczos matrix implied by `m` CG steps: diagonal
/// `1/a_k + b_{k-1}/a_{k-1}` and off-diagonal `sqrt(b_k)/a_k`.
pub fn lanczos_tridiagonal<T: Scalar>(alpha: &[T], beta: &[T]) -> (Vec<T>, Vec<T>) {
    let m = alpha.len();
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for k in 0..m {
        let mut d = T::one() / alpha[k];
        if k > 0 {
            d += beta[k - 1] / alpha[k - 1];
        }
        diag.push(d);
        if k + 1 < m {
            off.push(beta[k].sqrt() / alpha[k]);
        }
    }
    (diag, off)
}

/// Estimates `lambda_min`, `lambda_max` and their ratio from recorded CG
/// coefficients. Under nullspace projection the estimate covers the
/// nonzero part of the spectrum only, since CG never excites the nullspace.
pub fn lanczos_condition_estimate<T: Scalar>(alpha: &[T], beta: &[T]) -> Result<ConditionEstimate> {
    let m = alpha.len();
    if m < 2 {
        return Err(Error::InvalidParams(format!("condition estimate needs at least 2 CG steps, got {m}")));
    }
    if beta.len() + 1 < m {
        return Err(Error::LengthMismatch {
            expected: m - 1,
            got: beta.len(),
        });
    }
    let (diag, off) = lanczos_tridiagonal(alpha, &beta[..m - 1]);
    let ev = if m <= 48 {
        // Small: cyclic Jacobi on the dense tridiagonal.
        let t = crate::eig::DenseMatrix::from_fn(m, |r, c| {
            if r == c {
                diag[r]
            } else if r + 1 == c {
                off[r]
            } else if c + 1 == r {
                off[c]
            } else {
                T::zero()
            }
        });
        jacobi_eigenvalues(&t, T::epsilon() * T::lit(16.0))?
    } else {
        tridiagonal_eigenvalues(&diag, &off)?
    };
    let lambda_min = ev[0].to_f64_lossy();
    let lambda_max = ev[m - 1].to_f64_lossy();
    Ok(ConditionEstimate {
        lambda_min,
        lambda_max,
        cond: lambda_max / lambda_min,
    })
}
