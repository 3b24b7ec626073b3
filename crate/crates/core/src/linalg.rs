//! Vector kernels, the linear-operator abstraction, and a compressed sparse
//! row matrix.
//!
//! All reductions run sequentially in index order so results are bitwise
//! reproducible.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square linear map `y = M x`.
///
/// `apply` takes `&self`; operators that need scratch space or want to expose
/// by-products of the last application use interior mutability.
pub trait LinearOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()>;
}

impl<T: Scalar, L: LinearOperator<T> + ?Sized> LinearOperator<T> for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        (**self).apply(x, y)
    }
}

pub fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn mean<T: Scalar>(a: &[T]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    a.iter().copied().sum::<T>() / T::from_count(a.len())
}

/// Removes the constant component.
pub fn project_out_mean<T: Scalar>(a: &mut [T]) {
    let m = mean(a);
    for x in a.iter_mut() {
        *x -= m;
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    /// Entries that sum to exactly zero are kept, so the sparsity pattern
    /// only depends on which triplets were supplied.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = M x`
    pub fn matvec(&self, x: &[T], y: &mut [T]) -> Result<()> {
        check_len(self.ncols, x.len())?;
        check_len(self.nrows, y.len())?;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr = s;
        }
        Ok(())
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y)?;
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }

    /// Writes `row col value` lines, 0-based, sorted row-major.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{r} {c} {:.17e}", v.to_f64_lossy())?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows
    }
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        self.matvec(x, y)
    }
}
