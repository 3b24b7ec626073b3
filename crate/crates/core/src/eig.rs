//! Dense symmetric eigensolvers.
//!
//! Two independent routes: Householder tridiagonalisation followed by
//! implicit QL (the default, `O(n^3)` once), and cyclic Jacobi rotations
//! (slower, used for small matrices and as a cross-check).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square dense matrix stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for c in 0..n {
            for r in 0..n {
                m.data[c * n + r] = f(r, c);
            }
        }
        m
    }

    /// Builds from row-major rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self::from_fn(n, |r, c| rows[r][c])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[c * self.n + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[c * self.n + r] = v;
    }

    pub fn column(&self, c: usize) -> &[T] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.n;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (c, &xc) in x.iter().enumerate() {
            if xc != T::zero() {
                for (yr, &a) in y.iter_mut().zip(self.column(c)) {
                    *yr += a * xc;
                }
            }
        }
        y
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|M_rc - M_cr|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for c in 0..self.n {
            for r in (c + 1)..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Replaces the matrix by `(M + M^T) / 2` and returns the asymmetry it had.
    pub fn symmetrize(&mut self) -> T {
        let worst = self.asymmetry();
        let half = T::lit(0.5);
        for c in 0..self.n {
            for r in (c + 1)..self.n {
                let v = half * (self.get(r, c) + self.get(c, r));
                self.set(r, c, v);
                self.set(c, r, v);
            }
        }
        worst
    }

    /// `Q^T M Q` for `Q` with orthonormal (or any) columns, `Q` being `n x k`
    /// given as `k` columns.
    pub fn congruence(&self, q: &[Vec<T>]) -> Self {
        let k = q.len();
        let mq: Vec<Vec<T>> = q.iter().map(|col| self.mul_vec(col)).collect();
        Self::from_fn(k, |r, c| crate::linalg::dot(&q[r], &mq[c]))
    }
}

/// Eigenvalues in ascending order (Householder + implicit QL).
pub fn eig_sym<T: Scalar>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let mut work = m.clone();
    let (mut d, mut e) = tridiagonalize(&mut work, false);
    tql(&mut d, &mut e, None)?;
    Ok(d)
}

/// Eigenvalues ascending with the matching orthonormal eigenvectors as columns.
pub fn eig_sym_vectors<T: Scalar>(m: &DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>)> {
    let mut v = m.clone();
    let (mut d, mut e) = tridiagonalize(&mut v, true);
    tql(&mut d, &mut e, Some(&mut v))?;
    Ok((d, v))
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off.len() == diag.len() - 1`), ascending.
pub fn tridiagonal_eigenvalues<T: Scalar>(diag: &[T], off: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert_eq!(off.len() + 1, n, "off-diagonal must have n - 1 entries");
    let mut d = diag.to_vec();
    // `tql` expects the sub-diagonal in e[1..n].
    let mut e = vec![T::zero(); n];
    e[1..].copy_from_slice(off);
    tql(&mut d, &mut e, None)?;
    Ok(d)
}

// Householder reduction of a symmetric matrix (tred2 from EISPACK, in the
// JAMA arrangement). Returns the tridiagonal diagonal and sub-diagonal
// (e[0] = 0). With `accumulate`, `v` is overwritten by the orthogonal
// transform; otherwise `v` is left as scratch.
fn tridiagonalize<T: Scalar>(v: &mut DenseMatrix<T>, accumulate: bool) -> (Vec<T>, Vec<T>) {
    let n = v.n;
    let zero = T::zero();
    let mut d = vec![zero; n];
    let mut e = vec![zero; n];
    if n == 0 {
        return (d, e);
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, zero);
                v.set(j, i, zero);
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                let col = v.column(j);
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = v.column_mut(j);
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = zero;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = v.get(j, j);
        }
        e[0] = zero;
        return (d, e);
    }

    for i in 0..(n - 1) {
        let vii = v.get(i, i);
        v.set(n - 1, i, vii);
        v.set(i, i, T::one());
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                let col = v.column_mut(j);
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, zero);
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, zero);
    }
    v.set(n - 1, n - 1, T::one());
    e[0] = zero;
    (d, e)
}

// Implicit QL on a symmetric tridiagonal matrix (tql2). `e[1..n]` holds the
// sub-diagonal on entry. Sorts the eigenvalues (and vectors) ascending.
fn tql<T: Scalar>(d: &mut [T], e: &mut [T], mut v: Option<&mut DenseMatrix<T>>) -> Result<()> {
    const MAX_ITER_PER_VALUE: usize = 60;
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER_PER_VALUE {
                    return Err(Error::EigNotConverged(iter));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        let nn = v.n;
                        let (lo, hi) = v.data.split_at_mut((i + 1) * nn);
                        let ci = &mut lo[i * nn..];
                        let ci1 = &mut hi[..nn];
                        for k in 0..nn {
                            let hk = ci1[k];
                            ci1[k] = s * ci[k] + c * hk;
                            ci[k] = c * ci[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }

    // Selection sort keeps eigenvector swaps cheap to express.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(v) = v.as_deref_mut() {
                let nn = v.n;
                for r in 0..nn {
                    v.data.swap(i * nn + r, k * nn + r);
                }
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `rel_tol * ||M||_F`. Returns eigenvalues ascending.
pub fn jacobi_eigenvalues<T: Scalar>(m: &DenseMatrix<T>, rel_tol: T) -> Result<Vec<T>> {
    const MAX_SWEEPS: usize = 100;
    let n = m.n;
    let mut a = m.clone();
    let target = rel_tol * a.frobenius();
    let off_norm = |a: &DenseMatrix<T>| {
        let mut s = T::zero();
        for c in 0..n {
            for r in 0..n {
                if r != c {
                    s += a.get(r, c) * a.get(r, c);
                }
            }
        }
        s.sqrt()
    };
    let one = T::one();
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= target {
            let mut ev: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
            return Ok(ev);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + one).sqrt());
                let c = one / (t * t + one).sqrt();
                let s = t * c;
                // A <- J^T A J, rotating rows and columns p, q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(Error::EigNotConverged(MAX_SWEEPS))
}
