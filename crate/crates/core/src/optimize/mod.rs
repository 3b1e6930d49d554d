//! Derivative-free constrained minimization: a stochastic-ranking evolution
//! strategy for the global stage and a linear-model trust-region method for the
//! local stage.

mod evaluator;
mod gun;
mod isres;
mod local;
mod ranking;
mod two_stage;

pub use evaluator::{read_trace, write_header, EvalRecord, Evaluation, Evaluator, Stage, TraceHeader, INVALID_PENALTY};
pub use gun::{GunProblem, ObjectiveMode, ObjectiveSpec};
pub use isres::{isres_minimize, IsresConfig};
pub use local::{local_minimize, LocalConfig};
pub use ranking::stochastic_rank;
pub use two_stage::{two_stage_optimize, OptimizerConfig, TwoStageResult};

use thiserror::Error;

/// A bound-constrained problem with inequality constraints `c(x) ≤ 0`.
pub trait Problem: Sync {
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn evaluate(&self, x: &[f64]) -> Evaluation;

    fn dim(&self) -> usize {
        self.lower().len()
    }

    /// Multipliers turning each constraint into penalty units.
    fn penalty_scales(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("search box has zero measure in coordinate {0}")]
    ZeroMeasure(usize),
    #[error("empty population")]
    EmptyPopulation,
    #[error("starting point is outside the bounds or has invalid geometry")]
    InvalidStart,
    #[error("degenerate simplex could not be repaired")]
    DegenerateSimplex,
    #[error("linear subproblem failed: {0}")]
    Subproblem(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Index of the best record: lowest `f` among feasible ones, else lowest penalty.
pub fn best_index(records: &[EvalRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, r) in records.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let o = &records[b];
                match (r.feasible(), o.feasible()) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => r.f < o.f,
                    (false, false) => r.penalty < o.penalty,
                }
            }
        };
        if better {
            best = Some(k);
        }
    }
    best
}

pub(crate) fn check_box(lower: &[f64], upper: &[f64]) -> Result<(), OptimizeError> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(OptimizeError::InvalidConfig("bounds must be non-empty and of equal length".into()));
    }
    for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !(l.is_finite() && u.is_finite()) {
            return Err(OptimizeError::InvalidConfig(format!("bound {k} is not finite")));
        }
        if !(u > l) {
            return Err(OptimizeError::ZeroMeasure(k));
        }
    }
    Ok(())
}
