//! Deterministic number formatting and CSV helpers.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use schurflow::stokes::SolveReport;

/// 17 significant digits, scientific notation; `NaN` and infinities as
/// Rust prints them. Empty for `None`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

/// Header and rows of a CSV file, all fields as strings.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

/// One row per outer iteration: `iter,res_prec,res_unprec,k,e_k`.
pub fn write_history(report: &SolveReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iter", "res_prec", "res_unprec", "k", "e_k"])?;
    for i in 0..report.perm_history.len() {
        let pick = |v: &[f64]| v.get(i).copied();
        w.write_record([
            i.to_string(),
            fmt_opt(pick(&report.res_prec)),
            fmt_opt(pick(&report.res_unprec)),
            fmt_f64(report.perm_history[i]),
            fmt_opt(pick(&report.perm_err_history)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pearson correlation coefficient; `None` for fewer than two points or a
/// constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0e-300, -7.25e12, 1.0696810394e-6] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').len(), 18);
        }
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn correlation() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0], &[1.0]).is_none());
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }
}
