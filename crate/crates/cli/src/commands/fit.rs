use std::path::Path;

use serde::Serialize;

use gunopt_core::geometry::{fit_profile, flat_profile};
use gunopt_core::spline::{chord_length_params, least_squares_fit, KnotVector, NurbsCurve};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub source: String,
    pub degree: usize,
    pub intervals: usize,
    pub samples: usize,
    pub residual: f64,
    pub max_error: f64,
    pub curve: NurbsCurve,
}

/// Reads `rho,z[,t]` rows; comment lines and a non-numeric header are skipped.
/// Without a `t` column the parameters are chord-length.
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, [f64; 2])>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match cells {
            Ok(c) if c.len() == 2 || c.len() == 3 => rows.push(c),
            Ok(_) => return Err(CliError::Config(format!("{} line {}: expected 2 or 3 columns", path.display(), k + 1))),
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(CliError::Config(format!("{} line {}: {e}", path.display(), k + 1))),
        }
    }
    if rows.len() < 2 {
        return Err(CliError::Config(format!("{}: need at least two samples", path.display())));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::Config(format!("{}: inconsistent column count", path.display())));
    }
    let points: Vec<[f64; 2]> = rows.iter().map(|r| [r[0], r[1]]).collect();
    let params = if rows[0].len() == 3 {
        rows.iter().map(|r| r[2]).collect()
    } else {
        chord_length_params(&points)
    };
    Ok(params.into_iter().zip(points).collect())
}

/// Least-squares spline fit of a profile with pinned endpoints. Without an input
/// file the flat electrode design of the configured gun is fitted exactly as the
/// model builder does (single piece, tangential start).
pub fn cmd_fit(
    cfg: &RunConfig,
    out: &OutputDir,
    input: Option<&Path>,
    degree: Option<usize>,
    intervals: usize,
) -> Result<FitReport, CliError> {
    let degree = degree.unwrap_or(cfg.geometry.curve_degree);
    if degree == 0 || intervals == 0 {
        return Err(CliError::config("degree and interval count must be positive"));
    }
    let (source, samples, fit) = match input {
        Some(p) => {
            let samples = read_profile_csv(p)?;
            let kv = KnotVector::uniform(degree, intervals, degree - 1).map_err(CliError::config)?;
            let fit = least_squares_fit(&samples, &kv, true)?;
            (p.display().to_string(), samples.len(), fit)
        }
        None => {
            if intervals != 1 {
                return Err(CliError::config("the flat design is fitted by a single polynomial piece"));
            }
            let pts = flat_profile(&cfg.geometry);
            (String::from("flat design"), pts.len(), fit_profile(&pts, degree)?)
        }
    };
    let report = FitReport {
        source,
        degree,
        intervals,
        samples,
        residual: fit.residual,
        max_error: fit.max_error,
        curve: fit.curve,
    };
    out.write_json("fit.json", &report)?;
    Ok(report)
}
