//! Multipatch description of the axisymmetric gun cross-section.

mod canonical;
mod design;
mod gun;
mod model;
mod region;
mod volume;

pub use canonical::{parallel_plate, spherical_capacitor};
pub use design::{apply_design, extract_design, DesignVector};
pub use gun::{
    build_gun_model, build_gun_model_with_curve, electrode_curve, electrode_design_map, filleted_polyline,
    fit_profile, flat_profile, refine_electrode, CurveRefinement, GunConfig, INSULATOR_SURFACE, PATCH_CAP,
    PATCH_FRONT, PATCH_INSULATOR, PATCH_INSULATOR_VACUUM, PATCH_OUTER, PATCH_TUBE, PATCH_WALL_VACUUM,
};
pub use model::{
    BoundarySide, BoundaryTag, Coord, CurveRef, DesignEntry, DesignMap, Diagnostics, Interface, Material,
    MultiPatchModel, Patch, PatchSide, RowBlend, EPS0,
};
pub use region::{gun_region, triple_point_samples, RegionConfig, RegionOfInterest, RegionPart, SamplePoint};
pub use volume::{electrode_volume, volume_of_revolution};

use thiserror::Error;

use crate::spline::SplineError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("invalid geometry configuration: {0}")]
    InvalidConfig(String),
    #[error("non-conforming model: {0}")]
    NonConforming(String),
    #[error("design value {value} at index {index} outside [{lower}, {upper}]")]
    OutOfBounds { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("design has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("open boundary loop: {0}")]
    OpenLoop(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
