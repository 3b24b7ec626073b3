//! Dense spectra of `S` and of the SIMPLE-preconditioned `S` on small
//! geometries, and the count of non-unit eigenvalues.

use serde::{Deserialize, Serialize};

pub use crate::eig::{eig_sym, jacobi_eigenvalues};

use crate::eig::{eig_sym_vectors, DenseMatrix};
use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::mac::{assemble, StaggeredSystem};
use crate::scalar::Scalar;
use crate::stokes::{InnerPrec, Preconditioner, SchurOperator};
use crate::voxgeo::{generate_packing, stats, PackingParams, VoxelGrid};

/// Largest pressure dimension the dense routines accept by default.
pub const DEFAULT_DENSE_CAP: usize = 6000;

/// Tolerances of a spectrum analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Inner tolerance of the column solves.
    pub eps_a: f64,
    /// Eigenvalues below `tau_null * lambda_max` count as zero.
    pub tau_null: f64,
    /// Eigenvalues with `|lambda - 1| > tau_unit` count as non-unit.
    pub tau_unit: f64,
    pub cap: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            eps_a: 1e-12,
            tau_null: 1e-10,
            tau_unit: 1e-6,
            cap: DEFAULT_DENSE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub prec: Preconditioner,
    pub m_p: usize,
    /// Ascending. For the preconditioned problem the shared nullspace is
    /// deflated first and is not listed here.
    pub eigenvalues: Vec<f64>,
    /// Zero eigenvalues (for the preconditioned problem: deflated directions).
    pub n_zero: usize,
    /// Eigenvalues away from one, zeros included.
    pub n_ev: usize,
    pub lambda_min_nonzero: f64,
    pub lambda_max: f64,
    pub cond_eff: f64,
    pub tau_null: f64,
    pub tau_unit: f64,
    /// Largest `|S_ij - S_ji|` before symmetrisation.
    pub asymmetry: f64,
}

impl SpectrumReport {
    /// Non-unit count for another `tau_unit`.
    pub fn count_non_unit(&self, tau_unit: f64) -> usize {
        self.n_zero + self.eigenvalues.iter().filter(|&&l| l.abs() >= self.tau_null * self.lambda_max && (l - 1.0).abs() > tau_unit).count()
    }
}

/// Dense `S`, column `j` being `S e_j`, symmetrised. Returns the matrix and
/// the asymmetry measured before symmetrisation.
pub fn dense_schur<T: Scalar>(sys: &StaggeredSystem<T>, eps_a: f64, cap: usize) -> Result<(DenseMatrix<T>, T)> {
    let m = sys.m_p();
    if m > cap {
        return Err(Error::DenseCapExceeded { size: m, cap });
    }
    let op = SchurOperator::new(sys, eps_a, InnerPrec::Ssor(1.5), 100_000)?;
    let mut s = DenseMatrix::zeros(m);
    let mut e = vec![T::zero(); m];
    for j in 0..m {
        e[j] = T::one();
        op.apply(&e, s.column_mut(j))?;
        e[j] = T::zero();
    }
    let asym = s.symmetrize();
    Ok((s, asym))
}

/// Dense `B diag(A)^{-1} B^T`.
pub fn dense_simple<T: Scalar>(sys: &StaggeredSystem<T>, cap: usize) -> Result<DenseMatrix<T>> {
    let m = sys.m_p();
    if m > cap {
        return Err(Error::DenseCapExceeded { size: m, cap });
    }
    let sparse = sys.simple_schur();
    let mut out = DenseMatrix::zeros(m);
    for r in 0..m {
        let (cols, vals) = sparse.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// Spectrum of `S` (Uzawa) or of the pencil `(S, S_hat)` (SIMPLE) for an
/// assembled system.
pub fn analyze_system<T: Scalar>(sys: &StaggeredSystem<T>, prec: Preconditioner, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let (s, asym) = dense_schur(sys, opts.eps_a, opts.cap)?;
    let (eigenvalues, n_deflated) = match prec {
        Preconditioner::Uzawa => (eig_sym(&s)?, 0),
        Preconditioner::Simple => {
            // S_hat = V L V^T; on the range of S_hat the pencil reduces to
            // the ordinary problem for L^{-1/2} V^T S V L^{-1/2}.
            let shat = dense_simple(sys, opts.cap)?;
            let (lam, v) = eig_sym_vectors(&shat)?;
            let top = lam.last().copied().unwrap_or_else(T::zero);
            let cut = T::lit(opts.tau_null) * top;
            let q: Vec<Vec<T>> = lam
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > cut)
                .map(|(i, &l)| {
                    let scale = T::one() / l.sqrt();
                    v.column(i).iter().map(|&x| x * scale).collect()
                })
                .collect();
            let deflated = lam.len() - q.len();
            let mut c = s.congruence(&q);
            c.symmetrize();
            (eig_sym(&c)?, deflated)
        }
    };
    let eigenvalues: Vec<f64> = eigenvalues.iter().map(|x| x.to_f64_lossy()).collect();
    Ok(summarize(prec, sys.m_p(), eigenvalues, n_deflated, asym.to_f64_lossy(), opts))
}

fn summarize(prec: Preconditioner, m_p: usize, eigenvalues: Vec<f64>, n_deflated: usize, asymmetry: f64, opts: &SpectrumOptions) -> SpectrumReport {
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0);
    let null_cut = opts.tau_null * lambda_max.abs();
    let n_zero_listed = eigenvalues.iter().filter(|l| l.abs() < null_cut || **l == 0.0).count();
    let lambda_min_nonzero = eigenvalues.iter().copied().find(|l| l.abs() >= null_cut && *l != 0.0).unwrap_or(f64::NAN);
    let n_zero = n_deflated + n_zero_listed;
    let n_ev = n_zero + eigenvalues.iter().filter(|&&l| l.abs() >= null_cut && l != 0.0 && (l - 1.0).abs() > opts.tau_unit).count();
    SpectrumReport {
        prec,
        m_p,
        eigenvalues,
        n_zero,
        n_ev,
        lambda_min_nonzero,
        lambda_max,
        cond_eff: lambda_max / lambda_min_nonzero,
        tau_null: opts.tau_null,
        tau_unit: opts.tau_unit,
        asymmetry,
    }
}

/// Assembles `grid` with flow along `x` and analyses its spectrum.
pub fn analyze_spectrum(grid: &VoxelGrid, prec: Preconditioner, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let m = grid.fluid_count();
    if m > opts.cap {
        return Err(Error::DenseCapExceeded { size: m, cap: opts.cap });
    }
    let sys: StaggeredSystem<f64> = assemble(grid, 0)?;
    analyze_system(&sys, prec, opts)
}

/// One row of the non-unit eigenvalue count check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NevRow {
    pub n_cells: usize,
    pub cell: usize,
    pub n_avg: usize,
    pub n_min: usize,
    pub seed: u64,
    pub v_surf: usize,
    pub n_ev_measured: usize,
    pub n_ev_formula: i64,
    pub matched: bool,
}

/// `V_surf + 3 N^2 - 1`.
pub fn nev_formula(v_surf: usize, n_cells: usize) -> i64 {
    v_surf as i64 + 3 * (n_cells * n_cells) as i64 - 1
}

/// Measures the non-unit count of `S` for every packing and compares it
/// with [`nev_formula`].
pub fn nev_formula_check(configs: &[PackingParams], opts: &SpectrumOptions) -> Result<Vec<NevRow>> {
    configs
        .iter()
        .map(|p| {
            let grid = generate_packing(p)?;
            let st = stats(&grid)?;
            let rep = analyze_spectrum(&grid, Preconditioner::Uzawa, opts)?;
            let formula = nev_formula(st.v_surf, p.n_cells);
            Ok(NevRow {
                n_cells: p.n_cells,
                cell: p.cell,
                n_avg: p.n_avg,
                n_min: p.n_min,
                seed: p.seed,
                v_surf: st.v_surf,
                n_ev_measured: rep.n_ev,
                n_ev_formula: formula,
                matched: rep.n_ev as i64 == formula,
            })
        })
        .collect()
}
