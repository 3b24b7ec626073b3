//! Pressure Schur complement solvers.
//!
//! Eliminating the velocity from `A u + B^T p = f`, `B u = 0` leaves
//! `S p = g` with `S = B A^{-1} B^T` and `g = B A^{-1} f`. The outer CG runs
//! on `S` either unpreconditioned (CG-Uzawa) or preconditioned by
//! `B diag(A)^{-1} B^T` (CG-SIMPLE). Every application of `S` and of the
//! SIMPLE preconditioner is itself an inner PCG solve.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{lanczos_condition_estimate, pcg, pcg_with, ConditionEstimate, Identity, Jacobi, NormKind, PcgConfig, Ssor};
use crate::linalg::{check_len, project_out_mean, CsrMatrix, LinearOperator};
use crate::mac::StaggeredSystem;
use crate::scalar::Scalar;

/// Outer preconditioner `S_hat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// `S_hat = I`.
    Uzawa,
    /// `S_hat = B diag(A)^{-1} B^T`.
    Simple,
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preconditioner::Uzawa => "uzawa",
            Preconditioner::Simple => "simple",
        })
    }
}

impl FromStr for Preconditioner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uzawa" => Ok(Preconditioner::Uzawa),
            "simple" => Ok(Preconditioner::Simple),
            _ => Err(Error::InvalidParams(format!("unknown preconditioner '{s}' (uzawa|simple)"))),
        }
    }
}

/// Preconditioner of the inner solves with `A` and `S_hat`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerPrec {
    Jacobi,
    /// SSOR with the given relaxation weight in `(0, 2)`.
    Ssor(f64),
}

/// Named tolerance regimes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Outer `1e-3` in the unpreconditioned norm, inner `1e-13`.
    Paper2d,
    /// Outer `1e-3` in the preconditioned norm, inner `1e-6`.
    Paper3d,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper2d" => Ok(Profile::Paper2d),
            "paper3d" => Ok(Profile::Paper3d),
            _ => Err(Error::InvalidParams(format!("unknown profile '{s}' (paper2d|paper3d)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper2d => "paper2d",
            Profile::Paper3d => "paper3d",
        })
    }
}

impl Profile {
    pub fn config(self, prec: Preconditioner) -> SchurConfig {
        match self {
            Profile::Paper2d => SchurConfig {
                eps_s: 1e-3,
                outer_norm: NormKind::Unpreconditioned,
                eps_a: 1e-13,
                eps_shat: 1e-13,
                ..SchurConfig::new(prec)
            },
            Profile::Paper3d => SchurConfig::new(prec),
        }
    }

    /// Settings for the reference permeability that error histories are
    /// measured against: CG-SIMPLE solved well past the profile's own
    /// accuracy.
    pub fn reference(self) -> SchurConfig {
        match self {
            Profile::Paper2d => SchurConfig {
                eps_s: 1e-8,
                outer_norm: NormKind::Preconditioned,
                eps_a: 1e-13,
                eps_shat: 1e-13,
                ..SchurConfig::new(Preconditioner::Simple)
            },
            Profile::Paper3d => SchurConfig {
                eps_s: 1e-5,
                eps_a: 1e-8,
                eps_shat: 1e-8,
                ..SchurConfig::new(Preconditioner::Simple)
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurConfig {
    pub prec: Preconditioner,
    pub eps_s: f64,
    pub outer_norm: NormKind,
    pub eps_a: f64,
    pub eps_shat: f64,
    /// Reference permeability for the error history.
    pub k_ref: Option<f64>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_prec: InnerPrec,
}

impl SchurConfig {
    /// Defaults of the `paper3d` profile.
    pub fn new(prec: Preconditioner) -> Self {
        Self {
            prec,
            eps_s: 1e-3,
            outer_norm: NormKind::Preconditioned,
            eps_a: 1e-6,
            eps_shat: 1e-6,
            k_ref: None,
            max_outer: 10_000,
            max_inner: 100_000,
            inner_prec: InnerPrec::Ssor(1.5),
        }
    }

    /// Rejects invalid settings; returns advisory warnings otherwise.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [("eps_s", self.eps_s), ("eps_a", self.eps_a), ("eps_shat", self.eps_shat)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParams(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParams("iteration limits must be at least 1".into()));
        }
        if let InnerPrec::Ssor(w) = self.inner_prec {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::InvalidParams(format!("SSOR weight must be in (0, 2), got {w}")));
            }
        }
        let mut warnings = Vec::new();
        if self.eps_a > self.eps_s {
            warnings.push(format!("eps_a ({}) looser than eps_s ({})", self.eps_a, self.eps_s));
        }
        Ok(warnings)
    }
}

/// Outcome of one Schur complement solve. Residual norms are absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub prec: Preconditioner,
    pub outer_norm: NormKind,
    pub converged: bool,
    pub iters_outer: usize,
    pub k_value: f64,
    pub k_ref: Option<f64>,
    pub res_prec: Vec<f64>,
    pub res_unprec: Vec<f64>,
    /// Permeability after each outer iteration (index 0 is the initial
    /// guess). The last entry is recomputed from the refreshed velocity.
    pub perm_history: Vec<f64>,
    /// `|k - k_ref| / k_ref` per iteration; empty without `k_ref`.
    pub perm_err_history: Vec<f64>,
    /// Lanczos estimate from the outer CG coefficients (needs two steps).
    pub cond_est_outer: Option<ConditionEstimate>,
    pub inner_iters_a: usize,
    pub inner_iters_shat: usize,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub pressure: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl SolveReport {
    pub fn final_error(&self) -> Option<f64> {
        self.perm_err_history.last().copied()
    }
}

/// PCG solver for a fixed sparse SPD (or, projected, SPSD) matrix.
pub struct InnerSolver<'a, T> {
    what: &'static str,
    mat: &'a CsrMatrix<T>,
    prec: Box<dyn LinearOperator<T> + 'a>,
    cfg: PcgConfig<T>,
    iters: Cell<usize>,
}

impl<'a, T: Scalar> InnerSolver<'a, T> {
    pub fn new(what: &'static str, mat: &'a CsrMatrix<T>, prec: InnerPrec, tol: f64, max_iter: usize, singular: bool) -> Result<Self> {
        let prec: Box<dyn LinearOperator<T> + 'a> = match prec {
            InnerPrec::Jacobi => Box::new(Jacobi::new(&mat.diagonal())?),
            InnerPrec::Ssor(w) => Box::new(Ssor::new(mat, T::lit(w))?),
        };
        let cfg = PcgConfig::new(T::lit(tol)).max_iter(max_iter).projected(singular).history(false);
        Ok(Self {
            what,
            mat,
            prec,
            cfg,
            iters: Cell::new(0),
        })
    }

    /// Solves `mat x = rhs` from a zero initial guess.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.mat.nrows();
        check_len(n, rhs.len())?;
        let res = pcg(self.mat, self.prec.as_ref(), rhs, &vec![T::zero(); n], &self.cfg)?;
        self.iters.set(self.iters.get() + res.iterations);
        if !res.converged {
            return Err(Error::InnerNotConverged {
                what: self.what,
                iters: res.iterations,
                residual: res.rel_residual.to_f64_lossy(),
            });
        }
        Ok(res.solution)
    }

    /// Total inner iterations so far.
    pub fn iterations(&self) -> usize {
        self.iters.get()
    }
}

/// `S = B A^{-1} B^T` as an operator. Each application keeps
/// `w = A^{-1} B^T p` for the velocity update.
pub struct SchurOperator<'a, T> {
    sys: &'a StaggeredSystem<T>,
    a_solver: InnerSolver<'a, T>,
    last_w: RefCell<Vec<T>>,
}

impl<'a, T: Scalar> SchurOperator<'a, T> {
    pub fn new(sys: &'a StaggeredSystem<T>, eps_a: f64, inner: InnerPrec, max_inner: usize) -> Result<Self> {
        Ok(Self {
            sys,
            a_solver: InnerSolver::new("A-solve", sys.a(), inner, eps_a, max_inner, false)?,
            last_w: RefCell::new(vec![T::zero(); sys.m_u()]),
        })
    }

    pub fn solve_a(&self, rhs: &[T]) -> Result<Vec<T>> {
        self.a_solver.solve(rhs)
    }

    pub fn last_w(&self) -> std::cell::Ref<'_, Vec<T>> {
        self.last_w.borrow()
    }

    pub fn inner_iterations(&self) -> usize {
        self.a_solver.iterations()
    }
}

impl<T: Scalar> LinearOperator<T> for SchurOperator<'_, T> {
    fn dim(&self) -> usize {
        self.sys.m_p()
    }

    fn apply(&self, p: &[T], y: &mut [T]) -> Result<()> {
        let mut bt_p = vec![T::zero(); self.sys.m_u()];
        self.sys.apply_bt(p, &mut bt_p)?;
        let w = self.a_solver.solve(&bt_p)?;
        self.sys.apply_b(&w, y)?;
        *self.last_w.borrow_mut() = w;
        Ok(())
    }
}

/// Inverse action of `B diag(A)^{-1} B^T` on zero-mean vectors.
pub struct SimplePreconditioner<'a, T> {
    solver: InnerSolver<'a, T>,
}

impl<'a, T: Scalar> SimplePreconditioner<'a, T> {
    /// `shat` must be [`StaggeredSystem::simple_schur`] of the system.
    pub fn new(shat: &'a CsrMatrix<T>, eps_shat: f64, inner: InnerPrec, max_inner: usize) -> Result<Self> {
        Ok(Self {
            solver: InnerSolver::new("S_hat-solve", shat, inner, eps_shat, max_inner, true)?,
        })
    }

    pub fn inner_iterations(&self) -> usize {
        self.solver.iterations()
    }
}

impl<T: Scalar> LinearOperator<T> for SimplePreconditioner<'_, T> {
    fn dim(&self) -> usize {
        self.solver.mat.nrows()
    }

    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        check_len(self.dim(), z.len())?;
        let mut rc = r.to_vec();
        project_out_mean(&mut rc);
        let sol = self.solver.solve(&rc)?;
        z.copy_from_slice(&sol);
        Ok(())
    }
}

/// `(S p, A^{-1} B^T p)` with the inner solve at relative tolerance `eps_a`.
pub fn apply_s<T: Scalar>(sys: &StaggeredSystem<T>, p: &[T], eps_a: f64) -> Result<(Vec<T>, Vec<T>)> {
    check_len(sys.m_p(), p.len())?;
    let op = SchurOperator::new(sys, eps_a, SchurConfig::new(Preconditioner::Uzawa).inner_prec, 100_000)?;
    let mut y = vec![T::zero(); sys.m_p()];
    op.apply(p, &mut y)?;
    let w = op.last_w.into_inner();
    Ok((y, w))
}

/// `(g, u_f) = (B A^{-1} f, A^{-1} f)` for the system's unit force.
pub fn rhs_g<T: Scalar>(sys: &StaggeredSystem<T>, eps_a: f64) -> Result<(Vec<T>, Vec<T>)> {
    rhs_g_with(sys, sys.force(), eps_a)
}

/// [`rhs_g`] for an arbitrary force vector.
pub fn rhs_g_with<T: Scalar>(sys: &StaggeredSystem<T>, f: &[T], eps_a: f64) -> Result<(Vec<T>, Vec<T>)> {
    check_len(sys.m_u(), f.len())?;
    let solver = InnerSolver::new("A-solve", sys.a(), SchurConfig::new(Preconditioner::Uzawa).inner_prec, eps_a, 100_000, false)?;
    let u = solver.solve(f)?;
    let mut g = vec![T::zero(); sys.m_p()];
    sys.apply_b(&u, &mut g)?;
    Ok((g, u))
}

/// Solves `B diag(A)^{-1} B^T z = r` on the zero-mean subspace.
pub fn simple_prec_apply<T: Scalar>(sys: &StaggeredSystem<T>, r: &[T], eps_shat: f64) -> Result<Vec<T>> {
    check_len(sys.m_p(), r.len())?;
    let shat = sys.simple_schur();
    let prec = SimplePreconditioner::new(&shat, eps_shat, SchurConfig::new(Preconditioner::Simple).inner_prec, 100_000)?;
    let mut z = vec![T::zero(); sys.m_p()];
    prec.apply(r, &mut z)?;
    Ok(z)
}

pub fn permeability<T: Scalar>(sys: &StaggeredSystem<T>, u: &[T]) -> Result<T> {
    sys.permeability(u)
}

/// Runs CG-Uzawa or CG-SIMPLE from `p = 0`.
///
/// The velocity follows the pressure iterate without extra solves: with
/// `p <- p - alpha d` the velocity `A^{-1}(f - B^T p)` moves by
/// `+alpha A^{-1} B^T d`, the by-product of applying `S` to `d`. After the
/// loop it is recomputed directly from the final pressure.
pub fn solve_schur<T: Scalar>(sys: &StaggeredSystem<T>, cfg: &SchurConfig) -> Result<SolveReport> {
    let warnings = cfg.validate()?;
    let start = Instant::now();
    let op = SchurOperator::new(sys, cfg.eps_a, cfg.inner_prec, cfg.max_inner)?;
    let u_f = op.solve_a(sys.force())?;
    let mut g = vec![T::zero(); sys.m_p()];
    sys.apply_b(&u_f, &mut g)?;

    let k_of = |u: &[T]| -> Result<f64> { Ok(sys.permeability(u)?.to_f64_lossy()) };
    let mut u = u_f;
    let mut perm_history = vec![k_of(&u)?];
    let outer = PcgConfig::new(T::lit(cfg.eps_s)).norm(cfg.outer_norm).max_iter(cfg.max_outer).projected(true);
    let p0 = vec![T::zero(); sys.m_p()];
    let mut observe = |step: &crate::krylov::PcgStep<'_, T>| -> Result<()> {
        let w = op.last_w();
        for (ui, &wi) in u.iter_mut().zip(w.iter()) {
            *ui += step.alpha * wi;
        }
        perm_history.push(k_of(&u)?);
        Ok(())
    };

    let shat;
    let mut shat_iters = 0;
    let res = match cfg.prec {
        Preconditioner::Uzawa => pcg_with(&op, &Identity::new(sys.m_p()), &g, &p0, &outer, &mut observe)?,
        Preconditioner::Simple => {
            shat = sys.simple_schur();
            let prec = SimplePreconditioner::new(&shat, cfg.eps_shat, cfg.inner_prec, cfg.max_inner)?;
            let res = pcg_with(&op, &prec, &g, &p0, &outer, &mut observe)?;
            shat_iters = prec.inner_iterations();
            res
        }
    };

    let mut rhs = sys.force().to_vec();
    let mut bt_p = vec![T::zero(); sys.m_u()];
    sys.apply_bt(&res.solution, &mut bt_p)?;
    for (r, b) in rhs.iter_mut().zip(&bt_p) {
        *r -= *b;
    }
    let u = op.solve_a(&rhs)?;
    let k_value = k_of(&u)?;
    *perm_history.last_mut().expect("history starts with the initial guess") = k_value;

    let cond_est_outer = if res.alpha.len() >= 2 {
        Some(lanczos_condition_estimate(&res.alpha, &res.beta)?)
    } else {
        None
    };
    let perm_err_history = match cfg.k_ref {
        Some(k_ref) => perm_history.iter().map(|k| (k - k_ref).abs() / k_ref.abs()).collect(),
        None => Vec::new(),
    };
    let to_f64 = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
    Ok(SolveReport {
        prec: cfg.prec,
        outer_norm: cfg.outer_norm,
        converged: res.converged,
        iters_outer: res.iterations,
        k_value,
        k_ref: cfg.k_ref,
        res_prec: to_f64(&res.res_prec),
        res_unprec: to_f64(&res.res_unprec),
        perm_history,
        perm_err_history,
        cond_est_outer,
        inner_iters_a: op.inner_iterations(),
        inner_iters_shat: shat_iters,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings,
        pressure: to_f64(&res.solution),
        velocity: to_f64(&u),
    })
}

/// Permeability from the profile's reference settings.
pub fn reference_permeability<T: Scalar>(sys: &StaggeredSystem<T>, profile: Profile) -> Result<f64> {
    let report = solve_schur(sys, &profile.reference())?;
    if !report.converged {
        return Err(Error::Other("reference solve did not converge".into()));
    }
    Ok(report.k_value)
}

/// Geometric-mean contraction of a residual history over its last `window`
/// steps.
pub fn tail_contraction(res: &[f64], window: usize) -> Option<f64> {
    if window == 0 || res.len() <= window {
        return None;
    }
    let last = res[res.len() - 1];
    let first = res[res.len() - 1 - window];
    Some((last / first).powf(1.0 / window as f64))
}

/// CG convergence factor `(sqrt(c) - 1) / (sqrt(c) + 1)` for condition
/// number `c`.
pub fn cg_rate(cond: f64) -> f64 {
    let s = cond.sqrt();
    (s - 1.0) / (s + 1.0)
}
