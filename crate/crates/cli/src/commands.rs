//! Argument definitions and the subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use schurflow::krylov::NormKind;
use schurflow::mac::assemble;
use schurflow::spectra::{analyze_system, nev_formula_check, SpectrumOptions, DEFAULT_DENSE_CAP};
use schurflow::stokes::{reference_permeability, solve_schur, InnerPrec, Preconditioner, Profile};
use schurflow::voxgeo::{enforce_connectivity, generate_packing, read_grid, stats, write_grid, PackingParams, VoxelGrid};
use schurflow::StaggeredSystem;

use crate::output::{csv_writer, fmt_f64, write_history};
use crate::sweep::{run_sweep, SweepParam, SweepSpec};
use crate::SolverOverrides;

#[derive(Debug, Parser)]
#[command(name = "schurflow", version, about = "Stokes permeability via pressure Schur complement solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random packing and write it as a voxel file.
    Gen(GenArgs),
    /// Print geometry statistics as JSON.
    Stats(StatsArgs),
    /// Solve for the permeability with CG-Uzawa or CG-SIMPLE.
    Solve(SolveArgs),
    /// Dense spectrum of S or of the SIMPLE-preconditioned S.
    Spectrum(SpectrumArgs),
    /// Run a parameter sweep and write CSV summaries.
    Sweep(SweepArgs),
    /// Compare measured non-unit eigenvalue counts with V_surf + 3N^2 - 1.
    NevCheck(NevArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PackingFlags {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Cells per axis.
    #[arg(long = "N", default_value_t = 7)]
    pub n_cells: usize,
    /// Cell side in voxels.
    #[arg(long = "nc", default_value_t = 50)]
    pub cell: usize,
    /// Average channel thickness.
    #[arg(long = "navg", default_value_t = 4)]
    pub n_avg: usize,
    /// Minimal channel thickness.
    #[arg(long = "nmin", default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl PackingFlags {
    pub fn params(&self) -> PackingParams {
        PackingParams {
            dim: self.dim,
            n_cells: self.n_cells,
            cell: self.cell,
            n_avg: self.n_avg,
            n_min: self.n_min,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, value_parser = parse_prec)]
    pub prec: Option<Preconditioner>,
    #[arg(long, value_parser = parse_profile)]
    pub profile: Option<Profile>,
    #[arg(long = "eps-s")]
    pub eps_s: Option<f64>,
    #[arg(long = "eps-a")]
    pub eps_a: Option<f64>,
    #[arg(long = "eps-shat")]
    pub eps_shat: Option<f64>,
    #[arg(long, value_parser = parse_norm)]
    pub norm: Option<NormKind>,
    #[arg(long = "flow-dir", value_parser = parse_axis, default_value = "x")]
    pub flow_dir: usize,
    /// Outer iteration limit.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Inner preconditioner: `jacobi` or `ssor[:omega]`.
    #[arg(long, value_parser = parse_inner)]
    pub inner: Option<InnerPrec>,
}

impl SolverFlags {
    pub fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            eps_s: self.eps_s,
            eps_a: self.eps_a,
            eps_shat: self.eps_shat,
            norm: self.norm,
            max_iter: self.max_iter,
            inner: self.inner,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub packing: PackingFlags,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub file: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Reference permeability for the error history.
    #[arg(long = "k-ref", conflicts_with = "reference")]
    pub k_ref: Option<f64>,
    /// Compute the reference permeability with the profile's tight settings.
    #[arg(long)]
    pub reference: bool,
    /// Keep only the largest fluid component instead of failing.
    #[arg(long = "enforce-connectivity")]
    pub enforce_connectivity: bool,
    /// Output prefix: writes `<out>.json` and `<out>.csv`.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    pub file: PathBuf,
    #[arg(long, value_parser = parse_prec, default_value = "uzawa")]
    pub prec: Preconditioner,
    #[arg(long = "eps-a", default_value_t = 1e-12)]
    pub eps_a: f64,
    #[arg(long = "tau-null", default_value_t = 1e-10)]
    pub tau_null: f64,
    #[arg(long = "tau-unit", default_value_t = 1e-6)]
    pub tau_unit: f64,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub cap: usize,
    #[arg(long = "flow-dir", value_parser = parse_axis, default_value = "x")]
    pub flow_dir: usize,
    #[arg(long = "enforce-connectivity")]
    pub enforce_connectivity: bool,
    /// Output prefix: writes `<out>.csv` (eigenvalues) and `<out>.json`.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub packing: PackingFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Parameter to vary: navg, nmin, nc, N or seed.
    #[arg(long, default_value = "navg")]
    pub vary: SweepParam,
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12")]
    pub values: Vec<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_prec, default_value = "uzawa,simple")]
    pub precs: Vec<Preconditioner>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also compute dense spectra for members under the cap.
    #[arg(long)]
    pub spectrum: bool,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub cap: usize,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NevArgs {
    #[arg(long = "N", value_delimiter = ',', default_value = "1,2,3")]
    pub n_cells: Vec<usize>,
    #[arg(long = "nc", value_delimiter = ',', default_value = "8,12,16")]
    pub cells: Vec<usize>,
    #[arg(long = "navg", default_value_t = 4)]
    pub n_avg: usize,
    #[arg(long = "nmin", default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long = "tau-unit", default_value_t = 1e-6)]
    pub tau_unit: f64,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    pub cap: usize,
    /// CSV destination; stdout when absent.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
}

fn parse_prec(s: &str) -> Result<Preconditioner, String> {
    s.parse().map_err(|e: schurflow::Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: schurflow::Error| e.to_string())
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    match s {
        "prec" => Ok(NormKind::Preconditioned),
        "unprec" => Ok(NormKind::Unpreconditioned),
        _ => Err(format!("unknown norm '{s}' (prec|unprec)")),
    }
}

fn parse_axis(s: &str) -> Result<usize, String> {
    match s {
        "x" => Ok(0),
        "y" => Ok(1),
        "z" => Ok(2),
        _ => Err(format!("unknown axis '{s}' (x|y|z)")),
    }
}

fn parse_inner(s: &str) -> Result<InnerPrec, String> {
    match s.split_once(':') {
        None if s == "jacobi" => Ok(InnerPrec::Jacobi),
        None if s == "ssor" => Ok(InnerPrec::Ssor(1.5)),
        Some(("ssor", w)) => w.parse().map(InnerPrec::Ssor).map_err(|e| format!("bad SSOR weight: {e}")),
        _ => Err(format!("unknown inner preconditioner '{s}' (jacobi|ssor[:omega])")),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::NevCheck(a) => cmd_nev_check(&a),
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn load(path: &Path, enforce: bool) -> Result<VoxelGrid> {
    let grid = read_grid(path).with_context(|| format!("reading {}", path.display()))?;
    if enforce && grid.fluid_count() > 0 {
        let (kept, removed) = enforce_connectivity(&grid);
        if removed > 0 {
            eprintln!("enforce_connectivity: solidified {removed} voxels");
        }
        return Ok(kept);
    }
    Ok(grid)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let grid = generate_packing(&a.packing.params())?;
    write_grid(&grid, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let grid = load(&a.file, false)?;
    let st = stats(&grid)?;
    let value = serde_json::to_value(st)?;
    match &a.out {
        Some(p) => fs::write(p, serde_json::to_string_pretty(&value)? + "\n")?,
        None => print_json(&value)?,
    }
    Ok(())
}

pub fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let grid = load(&a.file, a.enforce_connectivity)?;
    let sys: StaggeredSystem = assemble(&grid, a.solver.flow_dir)?;
    let profile = a.solver.profile.unwrap_or(Profile::Paper3d);
    let prec = a.solver.prec.unwrap_or(Preconditioner::Simple);
    let mut cfg = a.solver.overrides().apply(profile.config(prec));
    cfg.k_ref = match (a.k_ref, a.reference) {
        (Some(k), _) => Some(k),
        (None, true) => Some(reference_permeability(&sys, profile)?),
        (None, false) => None,
    };
    let report = solve_schur(&sys, &cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(prefix) = &a.out {
        fs::write(with_ext(prefix, "json"), serde_json::to_string(&report)? + "\n")?;
        write_history(&report, &with_ext(prefix, "csv"))?;
    }
    print_json(&json!({
        "prec": report.prec,
        "outer_norm": report.outer_norm,
        "converged": report.converged,
        "iters_outer": report.iters_outer,
        "k_value": report.k_value,
        "k_ref": report.k_ref,
        "e_final": report.final_error(),
        "cond_est_outer": report.cond_est_outer,
        "inner_iters_a": report.inner_iters_a,
        "inner_iters_shat": report.inner_iters_shat,
        "wall_time_s": report.wall_time_s,
    }))
}

pub fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let grid = load(&a.file, a.enforce_connectivity)?;
    let opts = SpectrumOptions {
        eps_a: a.eps_a,
        tau_null: a.tau_null,
        tau_unit: a.tau_unit,
        cap: a.cap,
    };
    let m = grid.fluid_count();
    if m > a.cap {
        return Err(schurflow::Error::DenseCapExceeded { size: m, cap: a.cap }.into());
    }
    let sys: StaggeredSystem = assemble(&grid, a.flow_dir)?;
    let rep = analyze_system(&sys, a.prec, &opts)?;
    if let Some(prefix) = &a.out {
        let mut w = csv_writer(&with_ext(prefix, "csv"))?;
        w.write_record(["index", "eigenvalue"])?;
        for (i, l) in rep.eigenvalues.iter().enumerate() {
            w.write_record([i.to_string(), fmt_f64(*l)])?;
        }
        w.flush()?;
        fs::write(with_ext(prefix, "json"), serde_json::to_string_pretty(&rep)? + "\n")?;
    }
    let st = stats(&grid)?;
    print_json(&json!({
        "prec": rep.prec,
        "m_p": rep.m_p,
        "v_surf": st.v_surf,
        "n_zero": rep.n_zero,
        "n_ev": rep.n_ev,
        "lambda_min_nonzero": rep.lambda_min_nonzero,
        "lambda_max": rep.lambda_max,
        "cond_eff": rep.cond_eff,
        "asymmetry": rep.asymmetry,
    }))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        base: a.packing.params(),
        param: a.vary,
        values: a.values.clone(),
        precs: a.precs.clone(),
        profile: a.solver.profile.unwrap_or(Profile::Paper2d),
        overrides: a.solver.overrides(),
        flow_dir: a.solver.flow_dir,
        out_dir: a.out.clone(),
        workers: a.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        spectrum: a.spectrum,
        cap: a.cap,
    };
    if a.solver.prec.is_some() {
        bail!("sweep takes --precs, not --prec");
    }
    let members = run_sweep(&spec)?;
    let failed = members.iter().filter(|m| m.error.is_some() || m.runs.iter().any(|r| r.report.is_err())).count();
    eprintln!("sweep: {} members, {failed} with errors; results in {}", members.len(), spec.out_dir.display());
    Ok(())
}

pub fn cmd_nev_check(a: &NevArgs) -> Result<()> {
    let mut configs = Vec::new();
    for &n in &a.n_cells {
        for &c in &a.cells {
            for &seed in &a.seeds {
                configs.push(PackingParams::new_2d(n, c, a.n_avg, a.n_min, seed));
            }
        }
    }
    let opts = SpectrumOptions {
        tau_unit: a.tau_unit,
        cap: a.cap,
        ..Default::default()
    };
    let rows = nev_formula_check(&configs, &opts)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["N", "n_c", "n_avg", "seed", "V_surf", "N_ev_measured", "N_ev_formula", "match"])?;
    for r in &rows {
        w.write_record([
            r.n_cells.to_string(),
            r.cell.to_string(),
            r.n_avg.to_string(),
            r.seed.to_string(),
            r.v_surf.to_string(),
            r.n_ev_measured.to_string(),
            r.n_ev_formula.to_string(),
            r.matched.to_string(),
        ])?;
    }
    w.flush()?;
    let matched = rows.iter().filter(|r| r.matched).count();
    eprintln!("nev-check: {matched}/{} rows match", rows.len());
    Ok(())
}
