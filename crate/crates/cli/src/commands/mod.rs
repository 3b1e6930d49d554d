//! One module per subcommand, plus the model and field helpers they share.

mod fit;
mod optimize;
mod refine;
mod report;
mod solve;
mod track;

pub use fit::{cmd_fit, read_profile_csv, FitReport};
pub use optimize::{cmd_optimize, CriticalReport, DesignSummary, OptimizeOutcome, OptimizeReport, TRACE_FILE};
pub use refine::{cmd_refine_study, Sequence, StudyReport, StudyRow};
pub use report::{build_report, cmd_report, render_text, EvaluationCounts, RunReport, TracePoint};
pub use solve::{cmd_solve, write_profiles, SolveReport};
pub use track::{cmd_track, Convergence, LevelSummary, TrackOutcome, TrackReport, LEVELS};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use gunopt_core::geometry::{
    build_gun_model, electrode_volume, gun_region, parallel_plate, spherical_capacitor, Material, MultiPatchModel,
    RegionOfInterest,
};
use gunopt_core::geometry::BoundaryTag;
use gunopt_core::iga::{solve_model, BoundarySelector, FieldMax, FieldSolution};

use crate::config::{Case, RunConfig};
use crate::error::CliError;

/// Model of the configured case; a gun model file takes precedence over `geometry`.
pub fn build_model(cfg: &RunConfig, model_file: Option<&Path>) -> Result<MultiPatchModel, CliError> {
    match (&cfg.case, model_file.or(cfg.model_file.as_deref())) {
        (Case::Gun, Some(p)) => Ok(MultiPatchModel::read(p)?),
        (Case::Gun, None) => Ok(build_gun_model(&cfg.geometry)?.0),
        (Case::SphericalCapacitor { inner, outer }, _) => Ok(spherical_capacitor(*inner, *outer)?),
        (Case::ParallelPlate { radius, gap }, _) => Ok(parallel_plate(*radius, *gap)?),
    }
}

/// Solve with the accurate (final) discretization of the config.
pub fn solve_accurate(cfg: &RunConfig, model: &MultiPatchModel) -> Result<FieldSolution, CliError> {
    let o = &cfg.objective;
    Ok(solve_model(Arc::new(model.clone()), o.final_discretization, o.voltages, o.solver)?)
}

fn magnitude(e: [f64; 2]) -> f64 {
    e[0].hypot(e[1])
}

/// `|E|` in vacuum at a boundary point, nudged inward along z when the exact
/// point is not found.
fn field_near(sol: &FieldSolution, p: [f64; 2], dz: f64) -> Option<f64> {
    sol.field_at_point(p, Some(Material::Vacuum))
        .or_else(|| sol.field_at_point([p[0], p[1] + dz], Some(Material::Vacuum)))
        .map(|(_, e)| magnitude(e))
}

/// Field magnitudes at the critical points of a design, in V/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFields {
    pub max_field: FieldMax,
    /// largest field over the electrode boundary profile, evaluated on the surface
    pub electrode_surface_max: f64,
    /// electrode volume in m³ (gun only)
    pub volume: Option<f64>,
    pub cathode_center: Option<f64>,
    /// largest and summed field over the triple-point samples
    pub triple_point_max: Option<f64>,
    pub triple_point_term: Option<f64>,
    pub anode_ring: Option<f64>,
}

pub fn critical_fields(cfg: &RunConfig, model: &MultiPatchModel, sol: &FieldSolution) -> Result<CriticalFields, CliError> {
    let electrode_surface_max = sol
        .boundary_profile(&BoundarySelector::Tag(BoundaryTag::GammaD1), cfg.profile_samples)?
        .iter()
        .map(|p| p.e_mag)
        .fold(0.0, f64::max);
    if cfg.case != Case::Gun {
        let max_field = sol.max_field(&RegionOfInterest::whole_model(model))?;
        return Ok(CriticalFields {
            max_field,
            electrode_surface_max,
            volume: None,
            cathode_center: None,
            triple_point_max: None,
            triple_point_term: None,
            anode_ring: None,
        });
    }
    let region = gun_region(model, &cfg.geometry.region)?;
    let max_field = sol.max_field(&region)?;
    let tp: Vec<f64> = region
        .samples
        .iter()
        .map(|s| sol.eval_field(s.patch, s.xi, s.eta).map(magnitude))
        .collect::<Result<_, _>>()?;
    let g = &cfg.geometry;
    let nudge = 1e-9 * model.length_scale();
    Ok(CriticalFields {
        max_field,
        electrode_surface_max,
        volume: Some(electrode_volume(model)?),
        cathode_center: field_near(sol, [0.0, 0.0], nudge),
        triple_point_max: tp.iter().copied().reduce(f64::max),
        triple_point_term: Some(tp.iter().sum()),
        anode_ring: field_near(sol, [g.aperture_radius, g.gap], -nudge),
    })
}
