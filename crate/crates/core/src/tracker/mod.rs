//! Space-charge-free relativistic macroparticle tracking through an axisymmetric
//! fieldmap, with per-plane beam statistics and self-convergence errors.

mod bunch;
mod integrate;
mod interp;
mod stats;

pub use bunch::{read_spot_csv, sample_bunch, BunchSource, Macroparticle};
pub use integrate::{track, PlaneHit, TrackResult, TrackingConfig};
pub use interp::FieldInterpolator;
pub use stats::{beam_stats, plane_stats, self_convergence, BeamStats, ConvergenceErrors, Deviation, PlaneStats};

use thiserror::Error;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Electron rest mass in kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Electron rest energy in eV.
pub const ELECTRON_REST_ENERGY_EV: f64 = 510_998.950_00;

/// Kinetic energy in eV of an electron with momentum `u` in units of `m_e c`.
pub fn kinetic_energy_ev(u: [f64; 3]) -> f64 {
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    // γ − 1 written to avoid cancellation at low energy
    ELECTRON_REST_ENERGY_EV * u2 / ((1.0 + u2).sqrt() + 1.0)
}

/// Velocity in m/s for momentum `u` in units of `m_e c`.
pub fn velocity(u: [f64; 3]) -> [f64; 3] {
    let g = (1.0 + u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    [SPEED_OF_LIGHT * u[0] / g, SPEED_OF_LIGHT * u[1] / g, SPEED_OF_LIGHT * u[2] / g]
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("invalid bunch source: {0}")]
    InvalidSource(String),
    #[error("invalid tracking config: {0}")]
    InvalidConfig(String),
    #[error("plane {plane} at z = {z} holds {count} particles, need at least 2")]
    EmptyPlane { plane: usize, z: f64, count: usize },
    #[error("plane counts differ: {0} vs {1}")]
    PlaneMismatch(usize, usize),
    #[error("spot file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::iga::{Fieldmap, FieldmapGrid};

    /// Fieldmap sampled from `(z, ρ) -> (E_z, E_ρ)` with every node valid.
    pub(crate) fn map_from(grid: FieldmapGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Fieldmap {
        let (mut ez, mut er) = (Vec::new(), Vec::new());
        for iz in 0..grid.nz {
            for ir in 0..grid.nr {
                let v = f(grid.z(iz), grid.r(ir));
                ez.push(v[0]);
                er.push(v[1]);
            }
        }
        let mask = vec![true; ez.len()];
        Fieldmap { grid, ez, er, mask }
    }
}
