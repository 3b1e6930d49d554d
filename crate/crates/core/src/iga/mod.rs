//! Isogeometric Galerkin solver for the axisymmetric electrostatic problem.

mod assemble;
mod fieldmap;
mod solution;
mod space;
pub mod sparse;

pub use assemble::{assemble, assemble_stiffness, solve, solve_model, LinearSolver, LinearSystem, Voltages};
pub use fieldmap::{export_fieldmap, Fieldmap, FieldmapGrid, FieldmapMeta};
pub use solution::{BoundarySelector, FieldMax, FieldSolution, ProfileSample};
pub use space::{Discretization, DirectionTable, PatchSpace, SplineSpace};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::spline::SplineError;

#[derive(Debug, Error)]
pub enum IgaError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("non-conforming model: {0}")]
    NonConforming(String),
    #[error("non-positive Jacobian {det:.3e} in patch {patch} at ({xi:.4}, {eta:.4})")]
    SingularJacobian { patch: usize, xi: f64, eta: f64, det: f64 },
    #[error("matrix is not positive definite (row {row}, pivot {pivot:.3e})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("iterative solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solve residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("unknown boundary: {0}")]
    UnknownBoundary(String),
    #[error("empty region of interest")]
    EmptyRegion,
    #[error("fieldmap grid: {0}")]
    InvalidGrid(String),
    #[error("fieldmap parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
