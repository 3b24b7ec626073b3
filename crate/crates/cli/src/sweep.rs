//! Parameter sweeps over synthetic packings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use schurflow::krylov::NormKind;
use schurflow::mac::assemble;
use schurflow::spectra::{analyze_system, SpectrumOptions};
use schurflow::stokes::{reference_permeability, solve_schur, Preconditioner, Profile, SolveReport};
use schurflow::voxgeo::{generate_packing, stats, GeometryStats, PackingParams};
use schurflow::StaggeredSystem;

use crate::output::{csv_writer, fmt_f64, fmt_opt, pearson, write_history};
use crate::SolverOverrides;

/// Packing parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NAvg,
    NMin,
    Cell,
    NCells,
    Seed,
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "navg" | "n_avg" => SweepParam::NAvg,
            "nmin" | "n_min" => SweepParam::NMin,
            "nc" | "cell" => SweepParam::Cell,
            "N" | "n_cells" => SweepParam::NCells,
            "seed" => SweepParam::Seed,
            _ => bail!("unknown sweep parameter '{s}' (navg|nmin|nc|N|seed)"),
        })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::NAvg => "navg",
            SweepParam::NMin => "nmin",
            SweepParam::Cell => "nc",
            SweepParam::NCells => "N",
            SweepParam::Seed => "seed",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSpec {
    pub base: PackingParams,
    pub param: SweepParam,
    pub values: Vec<u64>,
    pub precs: Vec<Preconditioner>,
    pub profile: Profile,
    pub overrides: SolverOverrides,
    pub flow_dir: usize,
    pub out_dir: PathBuf,
    pub workers: usize,
    /// Also compute dense spectra for members under `cap`.
    pub spectrum: bool,
    pub cap: usize,
}

impl SweepSpec {
    /// Channel-width sweep: `N = 7`, `n_c = 50`, `n_min = 2`,
    /// `n_avg` in 4..=12 step 2, both preconditioners, `paper2d`.
    pub fn channel_width(seed: u64, out_dir: PathBuf) -> Self {
        Self {
            base: PackingParams::new_2d(7, 50, 4, 2, seed),
            param: SweepParam::NAvg,
            values: vec![4, 6, 8, 10, 12],
            precs: vec![Preconditioner::Uzawa, Preconditioner::Simple],
            profile: Profile::Paper2d,
            overrides: SolverOverrides::default(),
            flow_dir: 0,
            out_dir,
            workers: 1,
            spectrum: false,
            cap: schurflow::spectra::DEFAULT_DENSE_CAP,
        }
    }

    pub fn configs(&self) -> Result<Vec<PackingParams>> {
        if self.values.is_empty() {
            bail!("sweep value list is empty");
        }
        if self.precs.is_empty() {
            bail!("sweep needs at least one preconditioner");
        }
        self.values
            .iter()
            .map(|&v| {
                let mut p = self.base;
                let as_usize = usize::try_from(v).context("sweep value out of range")?;
                match self.param {
                    SweepParam::NAvg => p.n_avg = as_usize,
                    SweepParam::NMin => p.n_min = as_usize,
                    SweepParam::Cell => p.cell = as_usize,
                    SweepParam::NCells => p.n_cells = as_usize,
                    SweepParam::Seed => p.seed = v,
                }
                p.validate().with_context(|| format!("invalid config {}={v}", self.param))?;
                Ok(p)
            })
            .collect()
    }
}

/// Runs `f(i)` for `i in 0..n` on up to `workers` threads; results come
/// back in index order.
pub fn run_pool<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|x| x.expect("every job ran")).collect()
}

/// Result of one preconditioner on one configuration.
#[derive(Clone, Debug)]
pub struct PrecRun {
    pub prec: Preconditioner,
    pub report: Result<SolveReport, String>,
    /// Dense effective condition number, when computed.
    pub cond_dense: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Member {
    pub params: PackingParams,
    pub stats: Option<GeometryStats>,
    pub k_ref: Option<f64>,
    pub runs: Vec<PrecRun>,
    /// Failure before any solve could run.
    pub error: Option<String>,
}

impl Member {
    pub fn run(&self, prec: Preconditioner) -> Option<&SolveReport> {
        self.runs.iter().find(|r| r.prec == prec).and_then(|r| r.report.as_ref().ok())
    }
}

fn tag(spec: &SweepSpec, p: &PackingParams) -> String {
    let v = match spec.param {
        SweepParam::NAvg => p.n_avg as u64,
        SweepParam::NMin => p.n_min as u64,
        SweepParam::Cell => p.cell as u64,
        SweepParam::NCells => p.n_cells as u64,
        SweepParam::Seed => p.seed,
    };
    format!("{}{v}", spec.param)
}

fn run_member(spec: &SweepSpec, params: PackingParams) -> Member {
    let mut member = Member {
        params,
        stats: None,
        k_ref: None,
        runs: Vec::new(),
        error: None,
    };
    let grid = match generate_packing(&params) {
        Ok(g) => g,
        Err(e) => {
            member.error = Some(e.to_string());
            return member;
        }
    };
    member.stats = stats(&grid).ok();
    let sys: StaggeredSystem = match assemble(&grid, spec.flow_dir) {
        Ok(s) => s,
        Err(e) => {
            member.error = Some(e.to_string());
            return member;
        }
    };
    match reference_permeability(&sys, spec.profile) {
        Ok(k) => member.k_ref = Some(k),
        Err(e) => {
            member.error = Some(format!("reference solve: {e}"));
            return member;
        }
    }
    for &prec in &spec.precs {
        let mut cfg = spec.overrides.apply(spec.profile.config(prec));
        cfg.k_ref = member.k_ref;
        let report = solve_schur(&sys, &cfg).map_err(|e| e.to_string());
        if let Ok(r) = &report {
            let path = spec.out_dir.join(format!("history_{}_{prec}.csv", tag(spec, &params)));
            if let Err(e) = write_history(r, &path) {
                member.error = Some(format!("{e:#}"));
            }
        }
        let cond_dense = if spec.spectrum && sys.m_p() <= spec.cap {
            let opts = SpectrumOptions {
                cap: spec.cap,
                ..Default::default()
            };
            analyze_system(&sys, prec, &opts).ok().map(|s| s.cond_eff)
        } else {
            None
        };
        member.runs.push(PrecRun { prec, report, cond_dense });
    }
    member
}

pub const THRESHOLDS: [f64; 3] = [1e-2, 5e-3, 1e-3];

/// First iteration whose relative residual drops below `threshold`.
pub fn first_below(res: &[f64], threshold: f64) -> Option<usize> {
    let r0 = *res.first()?;
    (1..res.len()).find(|&i| res[i] / r0 < threshold)
}

fn config_fields(p: &PackingParams) -> Vec<String> {
    vec![p.n_cells.to_string(), p.cell.to_string(), p.n_avg.to_string(), p.n_min.to_string(), p.seed.to_string()]
}

const CONFIG_HEADER: [&str; 5] = ["N", "n_c", "n_avg", "n_min", "seed"];

/// Runs every member and writes `summary.csv`, `thresholds.csv`,
/// `correlation.csv`, `timing.csv`, `sweep.json`, and one iteration
/// history per solve into `out_dir`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Member>> {
    let configs = spec.configs()?;
    fs::create_dir_all(&spec.out_dir).with_context(|| format!("cannot create {}", spec.out_dir.display()))?;
    let members = run_pool(configs.len(), spec.workers, |i| run_member(spec, configs[i]));
    write_summary(&members, &spec.out_dir.join("summary.csv"))?;
    write_thresholds(&members, &spec.out_dir.join("thresholds.csv"))?;
    let corr = write_correlation(&members, &spec.out_dir.join("correlation.csv"))?;
    write_timing(&members, &spec.out_dir.join("timing.csv"))?;
    let meta = serde_json::json!({
        "spec": spec,
        "pearson_stv_cond_s": corr.0,
        "pearson_stv_cond_precond": corr.1,
    });
    fs::write(spec.out_dir.join("sweep.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(members)
}

fn write_summary(members: &[Member], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = CONFIG_HEADER.to_vec();
    header.extend(["stv_pct", "prec", "iters", "cond_est", "k_final", "k_ref", "e_final", "converged", "status"]);
    w.write_record(&header)?;
    for m in members {
        let stv = fmt_opt(m.stats.as_ref().map(|s| s.stv_pct));
        if let Some(err) = &m.error {
            if m.runs.is_empty() {
                let mut row = config_fields(&m.params);
                row.extend([stv.clone(), String::new(), String::new(), String::new(), String::new(), fmt_opt(m.k_ref), String::new(), String::new(), format!("error: {err}")]);
                w.write_record(&row)?;
                continue;
            }
        }
        for run in &m.runs {
            let mut row = config_fields(&m.params);
            row.push(stv.clone());
            row.push(run.prec.to_string());
            match &run.report {
                Ok(r) => row.extend([
                    r.iters_outer.to_string(),
                    fmt_opt(r.cond_est_outer.map(|c| c.cond)),
                    fmt_f64(r.k_value),
                    fmt_opt(m.k_ref),
                    fmt_opt(r.final_error()),
                    r.converged.to_string(),
                    "ok".into(),
                ]),
                Err(e) => row.extend([String::new(), String::new(), String::new(), fmt_opt(m.k_ref), String::new(), String::new(), format!("error: {e}")]),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_thresholds(members: &[Member], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = CONFIG_HEADER.to_vec();
    header.extend(["threshold", "prec", "norm_kind", "iter", "e_k", "k_at_threshold", "status"]);
    w.write_record(&header)?;
    for m in members {
        for run in &m.runs {
            let Ok(r) = &run.report else { continue };
            for thr in THRESHOLDS {
                for (kind, res) in [(NormKind::Unpreconditioned, &r.res_unprec), (NormKind::Preconditioned, &r.res_prec)] {
                    let mut row = config_fields(&m.params);
                    row.push(fmt_f64(thr));
                    row.push(run.prec.to_string());
                    row.push(if kind == NormKind::Preconditioned { "prec" } else { "unprec" }.into());
                    match first_below(res, thr) {
                        Some(i) => row.extend([
                            i.to_string(),
                            fmt_opt(r.perm_err_history.get(i).copied()),
                            fmt_f64(r.perm_history[i]),
                            "reached".into(),
                        ]),
                        None => row.extend([String::new(), String::new(), String::new(), "not_reached".into()]),
                    }
                    w.write_record(&row)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_correlation(members: &[Member], path: &Path) -> Result<(Option<f64>, Option<f64>)> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = CONFIG_HEADER.to_vec();
    header.extend(["stv_pct", "cond_S", "cond_precond", "cond_S_dense", "cond_precond_dense"]);
    w.write_record(&header)?;
    let (mut xs, mut ys, mut x2, mut y2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for m in members {
        let Some(st) = &m.stats else { continue };
        let cond = |p| m.run(p).and_then(|r| r.cond_est_outer).map(|c| c.cond);
        let dense = |p| m.runs.iter().find(|r| r.prec == p).and_then(|r| r.cond_dense);
        let (cs, cp) = (cond(Preconditioner::Uzawa), cond(Preconditioner::Simple));
        if let Some(c) = cs {
            xs.push(st.stv_pct);
            ys.push(c);
        }
        if let Some(c) = cp {
            x2.push(st.stv_pct);
            y2.push(c);
        }
        let mut row = config_fields(&m.params);
        row.extend([
            fmt_f64(st.stv_pct),
            fmt_opt(cs),
            fmt_opt(cp),
            fmt_opt(dense(Preconditioner::Uzawa)),
            fmt_opt(dense(Preconditioner::Simple)),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok((pearson(&xs, &ys), pearson(&x2, &y2)))
}

fn write_timing(members: &[Member], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = CONFIG_HEADER.to_vec();
    header.extend(["prec", "time", "inner_iters_a", "inner_iters_shat"]);
    w.write_record(&header)?;
    for m in members {
        for run in &m.runs {
            let Ok(r) = &run.report else { continue };
            let mut row = config_fields(&m.params);
            row.extend([
                run.prec.to_string(),
                format!("{:.3}", r.wall_time_s),
                r.inner_iters_a.to_string(),
                r.inner_iters_shat.to_string(),
            ]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
