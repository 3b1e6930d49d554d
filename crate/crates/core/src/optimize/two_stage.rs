use serde::{Deserialize, Serialize};

use super::{best_index, isres_minimize, local_minimize, EvalRecord, Evaluator, IsresConfig, LocalConfig, OptimizeError, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub isres: IsresConfig,
    pub local: LocalConfig,
    /// run the local stage only, from the start design
    pub skip_global: bool,
}

#[derive(Debug, Clone)]
pub struct TwoStageResult {
    /// evaluation of the start design
    pub initial: EvalRecord,
    /// best record of the global stage, if it ran
    pub global: Option<EvalRecord>,
    pub best: EvalRecord,
    pub evaluations: usize,
}

/// Global evolution strategy seeded with `start`, then the local method from its
/// best record. With `skip_global` only the local stage runs.
pub fn two_stage_optimize(ev: &mut Evaluator, start: &[f64], cfg: &OptimizerConfig) -> Result<TwoStageResult, OptimizeError> {
    let first = ev.count();
    let mut global = None;
    let local_start = if cfg.skip_global {
        start.to_vec()
    } else {
        ev.set_stage(Stage::Global);
        let g = isres_minimize(ev, Some(start), &cfg.isres)?;
        let d = g.design.clone();
        global = Some(g);
        d
    };
    ev.set_stage(Stage::Local);
    local_minimize(ev, &local_start, &cfg.local)?;
    let recs = &ev.records()[first..];
    let initial = recs[0].clone();
    let k = best_index(recs).ok_or(OptimizeError::EmptyPopulation)?;
    Ok(TwoStageResult {
        initial,
        global,
        best: recs[k].clone(),
        evaluations: recs.len(),
    })
}
