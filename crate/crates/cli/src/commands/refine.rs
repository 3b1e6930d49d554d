use std::path::Path;

use serde::{Deserialize, Serialize};

use gunopt_core::geometry::{electrode_curve, refine_electrode, CurveRefinement, MultiPatchModel};
use gunopt_core::optimize::{best_index, local_minimize, Evaluator, GunProblem, OptimizeError, Stage};

use super::build_model;
use crate::config::{Case, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

/// How a study step was reached from the shared starting step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    /// repeated halving of the knot intervals
    Halving,
    /// repeated degree elevation
    Elevation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub sequence: Sequence,
    pub step: usize,
    pub degree: usize,
    pub intervals: usize,
    pub n_opt: usize,
    /// optimized objective terms at the loop discretization
    pub e_max: f64,
    pub v_el: f64,
    pub evaluations: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
}

/// Local optimization of a refined model, started from its own (inherited) design.
fn optimize_step(cfg: &RunConfig, model: &MultiPatchModel) -> Result<(MultiPatchModel, StudyRow), CliError> {
    let problem = GunProblem::new(model.clone(), cfg.geometry.region.clone(), cfg.objective.clone())?;
    let mut ev = Evaluator::new(&problem);
    ev.set_stage(Stage::Local);
    local_minimize(&mut ev, problem.initial(), &cfg.optimizer.local)?;
    let records = ev.into_records();
    let best = &records[best_index(&records).ok_or(OptimizeError::EmptyPopulation)?];
    let optimized = problem.apply(&best.design)?;
    let curve = electrode_curve(&optimized);
    let row = StudyRow {
        sequence: Sequence::Halving,
        step: 0,
        degree: curve.degree(),
        intervals: curve.knots().breakpoints().len() - 1,
        n_opt: best.design.len(),
        e_max: best.aux.get("max_field").copied().unwrap_or(f64::NAN),
        v_el: best.aux.get("volume").copied().unwrap_or(f64::NAN),
        evaluations: records.len(),
        feasible: best.feasible(),
    };
    Ok((optimized, row))
}

/// Nested refinement study of the electrode curve: from the optimized first-degree
/// design, one sequence halves the knot intervals and one elevates the degree, with
/// a local optimization at every step started from the previous optimum.
pub fn cmd_refine_study(cfg: &RunConfig, out: &OutputDir, start: Option<&Path>) -> Result<StudyReport, CliError> {
    if cfg.case != Case::Gun {
        return Err(CliError::config("refine-study runs on the gun case only"));
    }
    let study = &cfg.refine_study;
    let mut model = build_model(cfg, start)?;
    let first = study.degrees[0];
    let degree = electrode_curve(&model).degree();
    if degree > first {
        return Err(CliError::Config(format!("start curve degree {degree} exceeds the first study degree {first}")));
    }
    let bound = cfg.geometry.design_bound;
    if degree < first {
        model = refine_electrode(&model, CurveRefinement::Elevate(first - degree), bound)?;
    }
    let (base, row0) = optimize_step(cfg, &model)?;
    let mut rows = vec![row0.clone()];
    let mut current = base.clone();
    for step in 1..=study.halvings {
        let refined = refine_electrode(&current, CurveRefinement::HalveIntervals, bound)?;
        let (m, row) = optimize_step(cfg, &refined)?;
        rows.push(StudyRow { step, ..row });
        current = m;
    }
    rows.push(StudyRow {
        sequence: Sequence::Elevation,
        ..row0
    });
    let mut current = base;
    for (step, w) in study.degrees.windows(2).enumerate() {
        let refined = refine_electrode(&current, CurveRefinement::Elevate(w[1] - w[0]), bound)?;
        let (m, row) = optimize_step(cfg, &refined)?;
        rows.push(StudyRow {
            sequence: Sequence::Elevation,
            step: step + 1,
            ..row
        });
        current = m;
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                match r.sequence {
                    Sequence::Halving => 0.0,
                    Sequence::Elevation => 1.0,
                },
                r.step as f64,
                r.degree as f64,
                r.intervals as f64,
                r.n_opt as f64,
                r.e_max,
                r.v_el,
                r.evaluations as f64,
                if r.feasible { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    out.write_csv(
        "refine_study.csv",
        &["sequence", "step", "degree", "intervals", "n_opt", "e_max", "v_el", "evaluations", "feasible"],
        &table,
    )?;
    let report = StudyReport { rows };
    out.write_json("refine_study.json", &report)?;
    Ok(report)
}
