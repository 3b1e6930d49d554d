use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gunopt_core::optimize::{best_index, read_trace, EvalRecord, Stage};

use super::optimize::{CriticalReport, TRACE_FILE};
use super::track::TrackReport;
use crate::config::Provenance;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub index: usize,
    pub stage: Stage,
    pub f: f64,
    pub max_field: Option<f64>,
    /// (ρ, z) of the largest field
    pub location: Option<[f64; 2]>,
    pub volume: Option<f64>,
    pub tp_term: Option<f64>,
    pub feasible: bool,
}

impl From<&EvalRecord> for TracePoint {
    fn from(r: &EvalRecord) -> Self {
        let aux = |k: &str| r.aux.get(k).copied();
        TracePoint {
            index: r.index,
            stage: r.stage,
            f: r.f,
            max_field: aux("max_field"),
            location: aux("max_field_rho").zip(aux("max_field_z")).map(|(a, b)| [a, b]),
            volume: aux("volume"),
            tp_term: aux("tp_term"),
            feasible: r.feasible(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCounts {
    pub global: usize,
    pub local: usize,
    #[serde(rename = "final")]
    pub accurate: usize,
}

/// Consolidated view of one run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub evaluations: EvaluationCounts,
    /// largest evaluator clock reading in the trace, in seconds
    pub wall_time: f64,
    /// start design and incumbent at the loop discretization
    pub initial: TracePoint,
    pub best: TracePoint,
    /// start design and incumbent at the final discretization, when recorded
    pub initial_final: Option<TracePoint>,
    pub best_final: Option<TracePoint>,
    pub critical: Option<CriticalReport>,
    pub tracking: Option<TrackReport>,
}

fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Builds the report of a run directory from its trace and optional summaries.
pub fn build_report(run_dir: &Path) -> Result<(Provenance, RunReport), CliError> {
    let trace = run_dir.join(TRACE_FILE);
    if !trace.exists() {
        return Err(CliError::Config(format!("{} has no optimization trace ({TRACE_FILE})", run_dir.display())));
    }
    let (header, records) = read_trace(&trace)?;
    let (search, accurate): (Vec<EvalRecord>, Vec<EvalRecord>) = records.into_iter().partition(|r| r.stage != Stage::Final);
    let first = search.first().ok_or_else(|| CliError::config("trace holds no evaluations"))?;
    let best = &search[best_index(&search).ok_or_else(|| CliError::config("trace holds no evaluations"))?];
    let count = |s: Stage| search.iter().filter(|r| r.stage == s).count();
    let wall_time = search.iter().chain(&accurate).map(|r| r.elapsed).fold(0.0, f64::max);
    let report = RunReport {
        evaluations: EvaluationCounts {
            global: count(Stage::Global),
            local: count(Stage::Local),
            accurate: accurate.len(),
        },
        wall_time,
        initial: first.into(),
        best: best.into(),
        initial_final: accurate.first().map(Into::into),
        best_final: accurate.get(1).map(Into::into),
        critical: read_optional(&run_dir.join("critical.json"))?,
        tracking: read_optional(&run_dir.join("track_summary.json"))?,
    };
    let prov = Provenance {
        config_hash: header.config_hash,
        seed: header.seed,
    };
    Ok((prov, report))
}

fn mv(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.4}", x / 1e6))
}

fn cm3(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.2}", x * 1e6))
}

/// Fixed-layout text rendering of a report.
pub fn render_text(prov: &Provenance, r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", prov.header());
    let _ = writeln!(
        s,
        "evaluations: global {} local {} final {}; wall time {:.1} s",
        r.evaluations.global, r.evaluations.local, r.evaluations.accurate, r.wall_time
    );
    let _ = writeln!(s, "\nobjective at the loop discretization");
    let _ = writeln!(s, "  initial f {:e}  best f {:e}  (record {})", r.initial.f, r.best.f, r.best.index);
    if let (Some(a), Some(b)) = (&r.initial_final, &r.best_final) {
        let _ = writeln!(s, "objective at the final discretization");
        let _ = writeln!(s, "  initial f {:e}  best f {:e}  reduction {:.2}%", a.f, b.f, 100.0 * (1.0 - b.f / a.f));
    }
    if let Some(c) = &r.critical {
        let _ = writeln!(s, "\nfield magnitude at critical points [MV/m]     initial      final");
        let rows = [
            ("maximum", Some(c.initial.max_field.value), Some(c.optimized.max_field.value)),
            ("triple point (max of samples)", c.initial.triple_point_max, c.optimized.triple_point_max),
            ("cathode center", c.initial.cathode_center, c.optimized.cathode_center),
            ("anode ring", c.initial.anode_ring, c.optimized.anode_ring),
        ];
        for (name, a, b) in rows {
            let _ = writeln!(s, "  {name:<36} {:>10} {:>10}", mv(a), mv(b));
        }
        let (pa, pb) = (c.initial.max_field.point, c.optimized.max_field.point);
        let _ = writeln!(
            s,
            "  maximum at (rho, z) [mm]             ({:.2}, {:.2}) ({:.2}, {:.2})",
            pa[0] * 1e3,
            pa[1] * 1e3,
            pb[0] * 1e3,
            pb[1] * 1e3
        );
        let _ = writeln!(s, "  electrode volume [cm3]               {:>10} {:>10}", cm3(c.initial.volume), cm3(c.optimized.volume));
    }
    if let Some(t) = &r.tracking {
        let _ = writeln!(s, "\ntracking (exit plane)");
        for l in &t.levels {
            let e = &l.exit;
            let _ = writeln!(
                s,
                "  {:<9} N={:<5} exited {} lost {} stalled {}  x_rms {:.4e} y_rms {:.4e} z_rms {:.4e} eps_x {:.4e} eps_y {:.4e} eps_z {:.4e} dE {:.4e} eV",
                l.level, l.particles, l.exited, l.lost, l.stalled, e.x_rms, e.y_rms, e.z_rms, e.eps_x, e.eps_y, e.eps_z, l.energy_spread
            );
        }
        if let Some(c) = &t.convergence {
            for (label, errs) in [("initial vs reference", &c.initial_vs_reference), ("refined vs reference", &c.refined_vs_reference)] {
                let cells: Vec<String> = errs.entries().iter().map(|(n, d)| format!("{n} {:.2}%", 100.0 * d.max_rel)).collect();
                let _ = writeln!(s, "  {label}: {}", cells.join(", "));
            }
        }
    }
    s
}

/// Writes `report.json` and `report.txt` into the run directory.
pub fn cmd_report(run_dir: &Path) -> Result<RunReport, CliError> {
    let (prov, report) = build_report(run_dir)?;
    let out = OutputDir::acquire(run_dir, prov.clone())?;
    out.write_json("report.json", &report)?;
    out.write_text("report.txt", &render_text(&prov, &report))?;
    Ok(report)
}
