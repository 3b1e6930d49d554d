use std::path::Path;

use serde::{Deserialize, Serialize};

use gunopt_core::iga::{export_fieldmap, Fieldmap, FieldmapGrid, FieldmapMeta};
use gunopt_core::tracker::{
    beam_stats, read_spot_csv, sample_bunch, self_convergence, track, BeamStats, ConvergenceErrors, PlaneStats,
    TrackingConfig,
};

use super::{build_model, solve_accurate};
use crate::config::{Case, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

/// Names of the refinement levels: each halves the time step and the fieldmap
/// spacing and doubles the particle count of the one before.
pub const LEVELS: [&str; 3] = ["initial", "refined", "reference"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub dt: f64,
    pub particles: usize,
    pub grid: FieldmapGrid,
    pub exited: usize,
    pub lost: usize,
    pub stalled: usize,
    pub exit: PlaneStats,
    /// RMS kinetic-energy spread at the exit plane in eV
    pub energy_spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Convergence {
    pub initial_vs_reference: ConvergenceErrors,
    pub refined_vs_reference: ConvergenceErrors,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackReport {
    /// bunch charge carried by each macroparticle of the first level, in C
    pub charge_per_particle: f64,
    pub levels: Vec<LevelSummary>,
    pub convergence: Option<Convergence>,
}

/// Full output of `track`, with the per-level statistics.
pub struct TrackOutcome {
    pub report: TrackReport,
    pub stats: Vec<BeamStats>,
}

fn run_level(cfg: &RunConfig, out: &OutputDir, level: usize, map: &Fieldmap, tc: &TrackingConfig) -> Result<(LevelSummary, BeamStats), CliError> {
    let mut source = cfg.source.clone();
    if let Some(p) = &cfg.spot_file {
        source.spot = Some(read_spot_csv(p)?);
    }
    let bunch = sample_bunch(&source, tc.particles, tc.seed)?;
    let result = track(&bunch, map, tc)?;
    let stats = beam_stats(&result)?;
    let name = LEVELS[level];
    out.write_text(&format!("track_stats_{name}.csv"), &stats.to_csv(&out.provenance().header()))?;
    let summary = LevelSummary {
        level: name.to_string(),
        dt: tc.dt,
        particles: tc.particles,
        grid: map.grid,
        exited: result.exited,
        lost: result.lost,
        stalled: result.stalled,
        exit: stats.exit().clone(),
        energy_spread: stats.energy_spread(),
    };
    Ok((summary, stats))
}

/// Tracks the sampled bunch through the gun field at three refinement levels and
/// reports self-convergence against the finest. A given fieldmap, or `study =
/// false`, runs the first level only.
pub fn cmd_track(
    cfg: &RunConfig,
    out: &OutputDir,
    model_file: Option<&Path>,
    fieldmap: Option<&Path>,
    study: bool,
) -> Result<TrackOutcome, CliError> {
    let mut maps = Vec::new();
    match fieldmap {
        Some(p) => maps.push(Fieldmap::read(p)?),
        None => {
            if cfg.case != Case::Gun {
                return Err(CliError::config("track needs the gun case or a fieldmap"));
            }
            let model = build_model(cfg, model_file)?;
            let sol = solve_accurate(cfg, &model)?;
            let mut grid = cfg.fieldmap;
            for name in &LEVELS[..if study { 3 } else { 1 }] {
                let map = export_fieldmap(&sol, &grid)?;
                let prov = out.provenance();
                let meta = FieldmapMeta {
                    grid,
                    config_hash: prov.config_hash.clone(),
                    seed: prov.seed,
                    masked: map.masked_count(),
                };
                map.write(&out.path(&format!("fieldmap_{name}.txt")), Some(&meta))?;
                maps.push(map);
                grid = grid.refined();
            }
        }
    }
    let mut tc = cfg.tracking.clone();
    let mut levels = Vec::new();
    let mut stats = Vec::new();
    for (k, map) in maps.iter().enumerate() {
        let (summary, s) = run_level(cfg, out, k, map, &tc)?;
        levels.push(summary);
        stats.push(s);
        tc = tc.refined();
    }
    let convergence = if stats.len() == 3 {
        Some(Convergence {
            initial_vs_reference: self_convergence(&stats[0], &stats[2])?,
            refined_vs_reference: self_convergence(&stats[1], &stats[2])?,
        })
    } else {
        None
    };
    let report = TrackReport {
        charge_per_particle: cfg.source.charge / cfg.tracking.particles as f64,
        levels,
        convergence,
    };
    out.write_json("track_summary.json", &report)?;
    Ok(TrackOutcome { report, stats })
}
