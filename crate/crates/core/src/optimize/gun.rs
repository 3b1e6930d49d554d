use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Evaluation, OptimizeError, Problem};
use crate::geometry::{apply_design, electrode_volume, extract_design, gun_region, MultiPatchModel, RegionConfig};
use crate::iga::{solve_model, Discretization, LinearSolver, Voltages};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// largest field magnitude over the region of interest
    MaxField,
    /// max field plus `weight` times the field summed over the triple-point samples
    TriplePointWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub mode: ObjectiveMode,
    /// Triple-point weight; a tunable default, not a published value.
    pub weight: f64,
    /// Electrode volume cap in m³.
    pub volume_cap: f64,
    /// Discretization of the solves inside the optimization loop.
    pub discretization: Discretization,
    /// Discretization of the final re-evaluation of the incumbent.
    pub final_discretization: Discretization,
    pub voltages: Voltages,
    pub solver: LinearSolver,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            mode: ObjectiveMode::MaxField,
            weight: 0.1,
            volume_cap: 625e-6,
            discretization: Discretization {
                n_sub: 8,
                ..Discretization::default()
            },
            final_discretization: Discretization::default(),
            voltages: Voltages::default(),
            solver: LinearSolver::default(),
        }
    }
}

impl ObjectiveSpec {
    pub fn check(&self) -> Result<(), OptimizeError> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(OptimizeError::InvalidConfig("objective weight must be finite and ≥ 0".into()));
        }
        if !(self.volume_cap > 0.0 && self.volume_cap.is_finite()) {
            return Err(OptimizeError::InvalidConfig("volume cap must be positive".into()));
        }
        Ok(())
    }

    fn weight_applies(&self) -> bool {
        self.mode == ObjectiveMode::TriplePointWeighted && self.weight > 0.0
    }
}

/// Electrode shape problem: minimize the objective over the design box subject to
/// `V_el − V_c ≤ 0`. Failures of any pipeline step give an invalid evaluation.
pub struct GunProblem {
    model: Arc<MultiPatchModel>,
    region: RegionConfig,
    spec: ObjectiveSpec,
    initial: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GunProblem {
    pub fn new(model: MultiPatchModel, region: RegionConfig, spec: ObjectiveSpec) -> Result<Self, OptimizeError> {
        spec.check()?;
        region.check().map_err(|e| OptimizeError::InvalidConfig(e.to_string()))?;
        let d = extract_design(&model);
        if d.is_empty() {
            return Err(OptimizeError::InvalidConfig("model has no design variables".into()));
        }
        Ok(GunProblem {
            model: Arc::new(model),
            region,
            spec,
            initial: d.values,
            lower: d.lower,
            upper: d.upper,
        })
    }

    pub fn model(&self) -> &MultiPatchModel {
        &self.model
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    /// Design values of the model the problem was built from.
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn apply(&self, x: &[f64]) -> Result<MultiPatchModel, OptimizeError> {
        let d = extract_design(&self.model).with_values(x.to_vec());
        apply_design(&self.model, &d).map_err(|e| OptimizeError::InvalidConfig(e.to_string()))
    }

    /// Evaluation with an explicit discretization.
    pub fn evaluate_with(&self, x: &[f64], disc: Discretization) -> Evaluation {
        let d = extract_design(&self.model).with_values(x.to_vec());
        let model = match apply_design(&self.model, &d) {
            Ok(m) => m,
            Err(_) => return Evaluation::invalid(vec![f64::NAN]),
        };
        let volume = match electrode_volume(&model) {
            Ok(v) => v,
            Err(_) => return Evaluation::invalid(vec![f64::NAN]),
        };
        let c = vec![volume - self.spec.volume_cap];
        let region = match gun_region(&model, &self.region) {
            Ok(r) => r,
            Err(_) => return Evaluation::invalid(c).with_aux("volume", volume),
        };
        let sol = match solve_model(Arc::new(model), disc, self.spec.voltages, self.spec.solver) {
            Ok(s) => s,
            Err(_) => return Evaluation::invalid(c).with_aux("volume", volume),
        };
        let (max, tp) = match (sol.max_field(&region), sol.triple_point_term(&region.samples)) {
            (Ok(m), Ok(t)) => (m, t),
            _ => return Evaluation::invalid(c).with_aux("volume", volume),
        };
        let mut f = max.value;
        if self.spec.weight_applies() {
            f += self.spec.weight * tp;
        }
        if !f.is_finite() {
            return Evaluation::invalid(c).with_aux("volume", volume);
        }
        Evaluation::new(f, c)
            .with_aux("volume", volume)
            .with_aux("max_field", max.value)
            .with_aux("max_field_rho", max.point[0])
            .with_aux("max_field_z", max.point[1])
            .with_aux("tp_term", tp)
    }
}

impl Problem for GunProblem {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        self.evaluate_with(x, self.spec.discretization)
    }

    /// Volume excess counted in cm³.
    fn penalty_scales(&self) -> Vec<f64> {
        vec![1e6]
    }
}
