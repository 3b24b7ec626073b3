//! Preconditioners, each applying an approximation of `M^{-1}`.

use crate::error::{Error, Result};
use crate::linalg::{check_len, CsrMatrix, LinearOperator};
use crate::scalar::Scalar;

/// `M = I`.
#[derive(Clone, Copy, Debug)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl<T: Scalar> LinearOperator<T> for Identity {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        y.copy_from_slice(x);
        Ok(())
    }
}

/// `M = diag(A)`.
#[derive(Clone, Debug)]
pub struct Jacobi<T> {
    inv_diag: Vec<T>,
}

impl<T: Scalar> Jacobi<T> {
    pub fn new(diag: &[T]) -> Result<Self> {
        if let Some((i, d)) = diag.iter().enumerate().find(|(_, &d)| !(d > T::zero())) {
            return Err(Error::InvalidParams(format!("nonpositive diagonal entry {d} at {i}")));
        }
        Ok(Self {
            inv_diag: diag.iter().map(|&d| T::one() / d).collect(),
        })
    }
}

impl<T: Scalar> LinearOperator<T> for Jacobi<T> {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.inv_diag.len(), x.len())?;
        check_len(self.inv_diag.len(), y.len())?;
        for ((yi, &xi), &w) in y.iter_mut().zip(x).zip(&self.inv_diag) {
            *yi = xi * w;
        }
        Ok(())
    }
}

/// Symmetric successive over-relaxation,
/// `M = (D/w + L) (D/w)^{-1} (D/w + U) * w / (2 - w)`.
///
/// With `w = 1` this is symmetric Gauss-Seidel. `M` is SPD whenever the
/// diagonal is positive, so it also serves singular Neumann-type matrices.
#[derive(Clone, Debug)]
pub struct Ssor<'a, T> {
    a: &'a CsrMatrix<T>,
    diag: Vec<T>,
    omega: T,
}

impl<'a, T: Scalar> Ssor<'a, T> {
    pub fn new(a: &'a CsrMatrix<T>, omega: T) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidParams("SSOR needs a square matrix".into()));
        }
        if !(omega > T::zero() && omega < T::lit(2.0)) {
            return Err(Error::InvalidParams(format!("SSOR weight must be in (0, 2), got {omega}")));
        }
        let diag = a.diagonal();
        if let Some((i, d)) = diag.iter().enumerate().find(|(_, &d)| !(d > T::zero())) {
            return Err(Error::InvalidParams(format!("nonpositive diagonal entry {d} at {i}")));
        }
        Ok(Self { a, diag, omega })
    }
}

impl<T: Scalar> LinearOperator<T> for Ssor<'_, T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        let n = self.diag.len();
        check_len(n, x.len())?;
        check_len(n, y.len())?;
        let w = self.omega;
        // Forward: (D/w + L) t = x.
        for i in 0..n {
            let (cols, vals) = self.a.row(i);
            let mut s = x[i];
            for (&c, &v) in cols.iter().zip(vals) {
                if c < i {
                    s -= v * y[c];
                }
            }
            y[i] = s * w / self.diag[i];
        }
        // Scale: t <- (D/w) t * (2 - w)/w.
        let scale = (T::lit(2.0) - w) / w;
        for i in 0..n {
            y[i] *= self.diag[i] / w * scale;
        }
        // Backward: (D/w + U) y = t.
        for i in (0..n).rev() {
            let (cols, vals) = self.a.row(i);
            let mut s = y[i];
            for (&c, &v) in cols.iter().zip(vals) {
                if c > i {
                    s -= v * y[c];
                }
            }
            y[i] = s * w / self.diag[i];
        }
        Ok(())
    }
}
