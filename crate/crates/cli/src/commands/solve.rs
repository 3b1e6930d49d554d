use std::path::Path;

use serde::{Deserialize, Serialize};

use gunopt_core::geometry::{BoundaryTag, INSULATOR_SURFACE};
use gunopt_core::iga::{export_fieldmap, BoundarySelector, Discretization, FieldSolution, FieldmapMeta, ProfileSample, Voltages};

use super::{build_model, critical_fields, solve_accurate, CriticalFields};
use crate::config::{Case, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub case: Case,
    pub discretization: Discretization,
    pub voltages: Voltages,
    pub fields: CriticalFields,
    /// fieldmap nodes outside the vacuum (gun only)
    pub fieldmap_masked: Option<usize>,
}

const PROFILE_COLUMNS: [&str; 5] = ["s", "rho", "z", "phi", "e_mag"];

fn profile_rows(p: &[ProfileSample]) -> Vec<Vec<f64>> {
    p.iter().map(|q| vec![q.s, q.point[0], q.point[1], q.phi, q.e_mag]).collect()
}

/// Writes electrode and (gun) insulator-surface profiles of a solution.
pub fn write_profiles(cfg: &RunConfig, out: &OutputDir, sol: &FieldSolution, suffix: &str) -> Result<(), CliError> {
    let n = cfg.profile_samples;
    let el = sol.boundary_profile(&BoundarySelector::Tag(BoundaryTag::GammaD1), n)?;
    out.write_csv(&format!("profile_electrode{suffix}.csv"), &PROFILE_COLUMNS, &profile_rows(&el))?;
    if cfg.case == Case::Gun {
        let ins = sol.boundary_profile(&BoundarySelector::Interface(INSULATOR_SURFACE.into()), n)?;
        out.write_csv(&format!("profile_insulator{suffix}.csv"), &PROFILE_COLUMNS, &profile_rows(&ins))?;
    }
    Ok(())
}

/// Builds the model, solves it at the accurate discretization, and writes the
/// model, critical-point fields, boundary profiles, and (gun) the fieldmap.
pub fn cmd_solve(cfg: &RunConfig, out: &OutputDir, model_file: Option<&Path>) -> Result<SolveReport, CliError> {
    let model = build_model(cfg, model_file)?;
    model.write(&out.path("model.json"))?;
    let sol = solve_accurate(cfg, &model)?;
    let fields = critical_fields(cfg, &model, &sol)?;
    write_profiles(cfg, out, &sol, "")?;
    let fieldmap_masked = if cfg.case == Case::Gun {
        let map = export_fieldmap(&sol, &cfg.fieldmap)?;
        let prov = out.provenance();
        let meta = FieldmapMeta {
            grid: cfg.fieldmap,
            config_hash: prov.config_hash.clone(),
            seed: prov.seed,
            masked: map.masked_count(),
        };
        map.write(&out.path("fieldmap.txt"), Some(&meta))?;
        Some(meta.masked)
    } else {
        None
    };
    let report = SolveReport {
        case: cfg.case.clone(),
        discretization: cfg.objective.final_discretization,
        voltages: cfg.objective.voltages,
        fields,
        fieldmap_masked,
    };
    out.write_json("solve.json", &report)?;
    Ok(report)
}
