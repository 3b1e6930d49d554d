use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use gunopt_core::geometry::MultiPatchModel;
use gunopt_core::optimize::{
    read_trace, two_stage_optimize, write_header, EvalRecord, Evaluator, GunProblem, ObjectiveMode, Stage, TraceHeader,
};

use super::{build_model, critical_fields, solve_accurate, CriticalFields};
use crate::config::{Case, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const TRACE_VERSION: u32 = 1;

/// Objective, field, and volume of one trace record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSummary {
    pub index: usize,
    pub f: f64,
    pub max_field: Option<f64>,
    pub volume: Option<f64>,
    pub tp_term: Option<f64>,
    pub feasible: bool,
}

impl From<&EvalRecord> for DesignSummary {
    fn from(r: &EvalRecord) -> Self {
        DesignSummary {
            index: r.index,
            f: r.f,
            max_field: r.aux.get("max_field").copied(),
            volume: r.aux.get("volume").copied(),
            tp_term: r.aux.get("tp_term").copied(),
            feasible: r.feasible(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub mode: ObjectiveMode,
    pub weight: f64,
    pub dim: usize,
    pub skip_global: bool,
    pub evaluations: usize,
    pub wall_time: f64,
    /// start design and incumbent at the loop discretization
    pub initial: DesignSummary,
    pub global: Option<DesignSummary>,
    pub best: DesignSummary,
    /// the same two designs re-evaluated at the final discretization
    pub initial_final: DesignSummary,
    pub best_final: DesignSummary,
    /// `|f_final − f_loop| / f_final` of the incumbent
    pub discretization_change: f64,
    /// `1 − f_best / f_initial`, both at the final discretization
    pub reduction: f64,
    pub best_design: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalReport {
    pub initial: CriticalFields,
    #[serde(rename = "final")]
    pub optimized: CriticalFields,
}

/// Outcome of `optimize`: the report and the optimized model.
pub struct OptimizeOutcome {
    pub report: OptimizeReport,
    pub model: MultiPatchModel,
    pub records: Vec<EvalRecord>,
}

fn open_trace(out: &OutputDir, header: &TraceHeader, resume: bool) -> Result<(BufWriter<File>, Vec<EvalRecord>), CliError> {
    let path = out.path(TRACE_FILE);
    let replay = if resume {
        if !path.exists() {
            return Err(CliError::Config(format!("no trace to resume at {}", path.display())));
        }
        let (old, records) = read_trace(&path)?;
        if old != *header {
            return Err(CliError::Config(format!(
                "trace {} was written by a different run ({} seed {}, dim {})",
                path.display(),
                old.config_hash,
                old.seed,
                old.dim
            )));
        }
        records
    } else {
        Vec::new()
    };
    let mut w = BufWriter::new(File::create(&path)?);
    write_header(&mut w, header)?;
    Ok((w, replay))
}

/// Two-stage optimization of the gun electrode with a resumable trace, followed by
/// a re-evaluation of the start design and the incumbent at the final
/// discretization. An infeasible incumbent is reported after the outputs are written.
pub fn cmd_optimize(cfg: &RunConfig, out: &OutputDir, resume: bool) -> Result<OptimizeOutcome, CliError> {
    if cfg.case != Case::Gun {
        return Err(CliError::config("optimize runs on the gun case only"));
    }
    let model = build_model(cfg, None)?;
    let problem = GunProblem::new(model.clone(), cfg.geometry.region.clone(), cfg.objective.clone())?;
    let start: Vec<f64> = problem.initial().to_vec();
    let prov = out.provenance();
    let header = TraceHeader {
        version: TRACE_VERSION,
        seed: prov.seed,
        config_hash: prov.config_hash.clone(),
        dim: start.len(),
    };
    let (mut writer, replay) = open_trace(out, &header, resume)?;
    let clock = Instant::now();
    let (res, initial_final, best_final, records) = {
        let mut ev = Evaluator::new(&problem).with_writer(&mut writer).with_replay(replay);
        let res = two_stage_optimize(&mut ev, &start, &cfg.optimizer)?;
        ev.set_stage(Stage::Final);
        let disc = cfg.objective.final_discretization;
        let a = ev.evaluate_with(&start, |x| problem.evaluate_with(x, disc))?;
        let b = ev.evaluate_with(&res.best.design, |x| problem.evaluate_with(x, disc))?;
        (res, a, b, ev.into_records())
    };
    drop(writer);
    let wall_time = clock.elapsed().as_secs_f64();

    let optimized = problem.apply(&res.best.design)?;
    optimized.write(&out.path("model_optimized.json"))?;
    let critical = CriticalReport {
        initial: critical_fields(cfg, &model, &solve_accurate(cfg, &model)?)?,
        optimized: critical_fields(cfg, &optimized, &solve_accurate(cfg, &optimized)?)?,
    };
    out.write_json("critical.json", &critical)?;

    let report = OptimizeReport {
        mode: cfg.objective.mode,
        weight: cfg.objective.weight,
        dim: start.len(),
        skip_global: cfg.optimizer.skip_global,
        evaluations: res.evaluations,
        wall_time,
        initial: (&res.initial).into(),
        global: res.global.as_ref().map(Into::into),
        best: (&res.best).into(),
        initial_final: (&initial_final).into(),
        best_final: (&best_final).into(),
        discretization_change: ((best_final.f - res.best.f) / best_final.f).abs(),
        reduction: 1.0 - best_final.f / initial_final.f,
        best_design: res.best.design.clone(),
    };
    out.write_json("optimize.json", &report)?;
    if !best_final.feasible() {
        return Err(CliError::Infeasible(format!(
            "incumbent violates the constraints at the final discretization (penalty {:e})",
            best_final.penalty
        )));
    }
    Ok(OptimizeOutcome {
        report,
        model: optimized,
        records,
    })
}
