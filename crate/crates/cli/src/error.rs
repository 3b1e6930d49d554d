use std::process::ExitCode;

use thiserror::Error;

use gunopt_core::geometry::GeometryError;
use gunopt_core::iga::IgaError;
use gunopt_core::optimize::OptimizeError;
use gunopt_core::spline::SplineError;
use gunopt_core::tracker::TrackError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("final design is infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn numerical(e: impl std::fmt::Display) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InvalidConfig(_)
            | GeometryError::OutOfBounds { .. }
            | GeometryError::DimensionMismatch { .. }
            | GeometryError::Io(_)
            | GeometryError::Json(_) => CliError::config(e),
            _ => CliError::numerical(e),
        }
    }
}

impl From<SplineError> for CliError {
    fn from(e: SplineError) -> Self {
        CliError::numerical(e)
    }
}

impl From<IgaError> for CliError {
    fn from(e: IgaError) -> Self {
        match e {
            IgaError::InvalidDiscretization(_)
            | IgaError::InvalidGrid(_)
            | IgaError::UnknownBoundary(_)
            | IgaError::Parse { .. }
            | IgaError::Io(_)
            | IgaError::Json(_) => CliError::config(e),
            _ => CliError::numerical(e),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::InvalidConfig(_) | OptimizeError::Trace(_) | OptimizeError::Io(_) | OptimizeError::Json(_) => {
                CliError::config(e)
            }
            _ => CliError::numerical(e),
        }
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::EmptyPlane { .. } | TrackError::PlaneMismatch(..) => CliError::numerical(e),
            _ => CliError::config(e),
        }
    }
}
