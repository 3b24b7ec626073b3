use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, norm2, project_out_mean, LinearOperator};
use crate::scalar::Scalar;

/// Which residual norm the stopping test uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `||z_k|| / ||z_0||` with `z = M^{-1} r`.
    #[serde(rename = "prec")]
    Preconditioned,
    /// `||r_k|| / ||r_0||`.
    #[serde(rename = "unprec")]
    Unpreconditioned,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgConfig<T> {
    pub tol: T,
    pub norm_kind: NormKind,
    pub max_iter: usize,
    /// Remove the constant component from the right-hand side, the initial
    /// guess, and every preconditioned residual.
    pub project_nullspace: bool,
    /// Keep coefficients and residual histories in the result.
    pub record_history: bool,
}

impl<T: Scalar> PcgConfig<T> {
    pub fn new(tol: T) -> Self {
        Self {
            tol,
            norm_kind: NormKind::Preconditioned,
            max_iter: 10_000,
            project_nullspace: false,
            record_history: true,
        }
    }

    pub fn norm(mut self, kind: NormKind) -> Self {
        self.norm_kind = kind;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn projected(mut self, on: bool) -> Self {
        self.project_nullspace = on;
        self
    }

    pub fn history(mut self, on: bool) -> Self {
        self.record_history = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParams(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcgResult<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// Step lengths, one per iteration.
    pub alpha: Vec<T>,
    /// Direction-update coefficients; one fewer than `alpha`.
    pub beta: Vec<T>,
    /// `||z_k||` for k = 0..=iterations (absolute).
    pub res_prec: Vec<T>,
    /// `||r_k||` for k = 0..=iterations (absolute).
    pub res_unprec: Vec<T>,
    pub converged: bool,
    /// Final relative residual in the norm used for stopping.
    pub rel_residual: T,
}

/// State handed to the observer after each iteration's update.
pub struct PcgStep<'a, T> {
    /// Number of completed iterations (1-based).
    pub iter: usize,
    pub alpha: T,
    pub solution: &'a [T],
    pub res_prec: T,
    pub res_unprec: T,
}

/// Solves `op x = rhs` with preconditioner `prec` (which applies `M^{-1}`).
pub fn pcg<T, A, M>(op: &A, prec: &M, rhs: &[T], x0: &[T], cfg: &PcgConfig<T>) -> Result<PcgResult<T>>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: LinearOperator<T> + ?Sized,
{
    pcg_with(op, prec, rhs, x0, cfg, |_| Ok(()))
}

/// [`pcg`] with a callback invoked after every iteration.
///
/// The residual is `r = op x - rhs`; the iterate moves as
/// `x <- x - alpha d`, `r <- r - alpha op d`.
pub fn pcg_with<T, A, M, F>(
    op: &A,
    prec: &M,
    rhs: &[T],
    x0: &[T],
    cfg: &PcgConfig<T>,
    mut observe: F,
) -> Result<PcgResult<T>>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: LinearOperator<T> + ?Sized,
    F: FnMut(&PcgStep<'_, T>) -> Result<()>,
{
    cfg.validate()?;
    let n = op.dim();
    check_len(n, rhs.len())?;
    check_len(n, x0.len())?;
    check_len(n, prec.dim())?;

    let mut b = rhs.to_vec();
    let mut x = x0.to_vec();
    if cfg.project_nullspace {
        project_out_mean(&mut b);
        project_out_mean(&mut x);
    }

    let mut r = vec![T::zero(); n];
    op.apply(&x, &mut r)?;
    for (ri, &bi) in r.iter_mut().zip(&b) {
        *ri -= bi;
    }
    let mut z = vec![T::zero(); n];
    prec.apply(&r, &mut z)?;
    if cfg.project_nullspace {
        project_out_mean(&mut z);
    }

    let z0 = norm2(&z);
    let r0 = norm2(&r);
    let mut out = PcgResult {
        solution: Vec::new(),
        iterations: 0,
        alpha: Vec::new(),
        beta: Vec::new(),
        res_prec: Vec::new(),
        res_unprec: Vec::new(),
        converged: false,
        rel_residual: T::zero(),
    };
    if cfg.record_history {
        out.res_prec.push(z0);
        out.res_unprec.push(r0);
    }
    let reference = match cfg.norm_kind {
        NormKind::Preconditioned => z0,
        NormKind::Unpreconditioned => r0,
    };
    if !reference.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    if reference == T::zero() {
        out.solution = x;
        out.converged = true;
        return Ok(out);
    }

    let mut d = z.clone();
    let mut q = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut k = 0;
    loop {
        op.apply(&d, &mut q)?;
        let curvature = dot(&d, &q);
        if !curvature.is_finite() {
            return Err(Error::NonFinite { iter: k });
        }
        if curvature <= T::zero() {
            return Err(Error::NotSpd {
                iter: k,
                curvature: curvature.to_f64_lossy(),
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] -= alpha * d[i];
            r[i] -= alpha * q[i];
        }
        prec.apply(&r, &mut z)?;
        if cfg.project_nullspace {
            project_out_mean(&mut z);
        }
        k += 1;
        let zn = norm2(&z);
        let rn = norm2(&r);
        if !(zn.is_finite() && rn.is_finite() && alpha.is_finite()) {
            return Err(Error::NonFinite { iter: k });
        }
        if cfg.record_history {
            out.alpha.push(alpha);
            out.res_prec.push(zn);
            out.res_unprec.push(rn);
        }
        observe(&PcgStep {
            iter: k,
            alpha,
            solution: &x,
            res_prec: zn,
            res_unprec: rn,
        })?;
        let rel = match cfg.norm_kind {
            NormKind::Preconditioned => zn / z0,
            NormKind::Unpreconditioned => rn / r0,
        };
        out.rel_residual = rel;
        if rel < cfg.tol {
            out.converged = true;
            break;
        }
        if k >= cfg.max_iter {
            break;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        if cfg.record_history {
            out.beta.push(beta);
        }
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    out.iterations = k;
    out.solution = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{Identity, Jacobi, Ssor};
    use crate::linalg::{mean, CsrMatrix};

    fn periodic_laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            t.push((i, (i + 1) % n, -1.0));
            t.push((i, (i + n - 1) % n, -1.0));
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    fn dirichlet_laplacian(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn identity_one_step() {
        let op = Identity::new(4);
        let rhs = [1.0f64, -2.0, 3.0, 0.5];
        let x0 = [0.3, 0.0, -1.0, 2.0];
        let res = pcg(&op, &Identity::new(4), &rhs, &x0, &PcgConfig::new(1e-12)).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        // r0 = x0 - rhs, so x0 - r0 = rhs.
        for (x, b) in res.solution.iter().zip(&rhs) {
            assert!((x - b).abs() < 1e-15);
        }
        assert_eq!(res.res_prec.len(), 2);
        assert!(res.beta.is_empty());
    }

    #[test]
    fn diagonal_ten() {
        let diag: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let a = CsrMatrix::from_triplets(10, 10, (0..10).map(|i| (i, i, diag[i])).collect());
        let res = pcg(&a, &Identity::new(10), &[1.0; 10], &[0.0; 10], &PcgConfig::new(1e-14)).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 10);
        for (x, d) in res.solution.iter().zip(&diag) {
            assert!((x - 1.0 / d).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_solves_diagonal_in_one_step() {
        let diag = vec![2.0, 5.0, 0.5];
        let a = CsrMatrix::from_triplets(3, 3, (0..3).map(|i| (i, i, diag[i])).collect());
        let m = Jacobi::new(&diag).unwrap();
        let res = pcg(&a, &m, &[1.0, 1.0, 1.0], &[0.0; 3], &PcgConfig::new(1e-12)).unwrap();
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn singular_periodic_with_projection() {
        let n = 32;
        let a = periodic_laplacian(n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.25).collect();
        let cfg = PcgConfig::new(1e-10).projected(true).norm(NormKind::Unpreconditioned);
        let mut means = Vec::new();
        let res = pcg_with(&a, &Identity::new(n), &rhs, &vec![1.0; n], &cfg, |s| {
            means.push(mean(s.solution).abs() / norm2(s.solution));
            Ok(())
        })
        .unwrap();
        assert!(res.converged);
        assert!(mean(&res.solution).abs() < 1e-12);
        assert!(means.iter().all(|&m| m <= 1e-12), "{means:?}");
        // Residual against the consistent (projected) right-hand side.
        let mut b = rhs.clone();
        project_out_mean(&mut b);
        let ax = a.mul_vec(&res.solution).unwrap();
        let resid: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&resid) / norm2(&b) < 1e-9);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let err = pcg(&a, &Identity::new(2), &[0.0, 1.0], &[0.0, 0.0], &PcgConfig::new(1e-10)).unwrap_err();
        assert!(matches!(err, Error::NotSpd { iter: 0, .. }));
    }

    #[test]
    fn max_iter_is_not_an_error() {
        let a = dirichlet_laplacian(64);
        let res = pcg(&a, &Identity::new(64), &[1.0; 64], &[0.0; 64], &PcgConfig::new(1e-12).max_iter(3)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.alpha.len(), 3);
        assert_eq!(res.beta.len(), 2);
        assert_eq!(res.res_unprec.len(), 4);
    }

    #[test]
    fn ssor_cuts_iterations() {
        let a = dirichlet_laplacian(64);
        let rhs: Vec<f64> = (0..64).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let cfg = PcgConfig::new(1e-10).norm(NormKind::Unpreconditioned);
        let plain = pcg(&a, &Identity::new(64), &rhs, &[0.0; 64], &cfg).unwrap();
        let ssor = pcg(&a, &Ssor::new(&a, 1.5).unwrap(), &rhs, &[0.0; 64], &cfg).unwrap();
        assert!(plain.converged && ssor.converged);
        assert!(
            (ssor.iterations as f64) <= 0.75 * plain.iterations as f64,
            "ssor {} vs plain {}",
            ssor.iterations,
            plain.iterations
        );
    }

    #[test]
    fn length_mismatch() {
        let a = dirichlet_laplacian(4);
        let err = pcg(&a, &Identity::new(4), &[1.0; 3], &[0.0; 4], &PcgConfig::new(1e-8)).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { expected: 4, got: 3 });
    }

    #[test]
    fn bad_config() {
        let a = dirichlet_laplacian(4);
        assert!(pcg(&a, &Identity::new(4), &[1.0; 4], &[0.0; 4], &PcgConfig::new(0.0)).is_err());
        assert!(pcg(&a, &Identity::new(4), &[1.0; 4], &[0.0; 4], &PcgConfig::new(1e-3).max_iter(0)).is_err());
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let a = dirichlet_laplacian(5);
        let res = pcg(&a, &Identity::new(5), &[0.0; 5], &[0.0; 5], &PcgConfig::new(1e-8)).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn single_precision_runs() {
        let a = CsrMatrix::<f32>::from_triplets(3, 3, vec![(0, 0, 4.0), (1, 1, 2.0), (2, 2, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let res = pcg(&a, &Identity::new(3), &[1.0f32, 2.0, 3.0], &[0.0; 3], &PcgConfig::new(1e-5f32)).unwrap();
        assert!(res.converged);
        let ax = a.mul_vec(&res.solution).unwrap();
        assert!((ax[2] - 3.0).abs() < 1e-4);
    }
}
