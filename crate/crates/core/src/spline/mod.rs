//! B-spline and NURBS curves and surfaces in the (ρ, z) half-plane.

mod curve;
mod fit;
mod knots;
mod refine;
mod surface;

pub use curve::NurbsCurve;
pub use fit::{chord_length_params, least_squares_fit, least_squares_fit_pinned, FitResult};
pub use knots::{BasisSpan, KnotVector};
pub use surface::{Direction, NurbsSurface, Side, SurfacePoint};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("derivative order {order} exceeds degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },
    #[error("invalid control net: {0}")]
    InvalidControlNet(String),
    #[error("cannot insert knot {knot}: {reason}")]
    InvalidInsertion { knot: f64, reason: String },
    #[error("degree elevation step must be at least 1")]
    InvalidElevation,
    #[error("least-squares system is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("invalid fit samples: {0}")]
    InvalidSamples(String),
}
