use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::TrackError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Macroparticle {
    /// (x, y, z) in m
    pub position: [f64; 3],
    /// momentum in units of `m_e c`
    pub momentum: [f64; 3],
    /// emission time in s
    pub t_emit: f64,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BunchSource {
    /// transverse RMS radii in m
    pub rx_rms: f64,
    pub ry_rms: f64,
    /// emission-time standard deviation in s
    pub sigma_t: f64,
    /// total bunch charge in C
    pub charge: f64,
    /// z of the emitting cathode plane in m
    pub z_cathode: f64,
    /// measured spot positions (x, y) in m, resampled instead of the Gaussian when set
    #[serde(skip)]
    pub spot: Option<Vec<[f64; 2]>>,
}

impl Default for BunchSource {
    fn default() -> Self {
        BunchSource {
            rx_rms: 0.41e-3,
            ry_rms: 0.72e-3,
            sigma_t: 5e-12,
            charge: 100e-15,
            z_cathode: 0.0,
            spot: None,
        }
    }
}

impl BunchSource {
    pub fn check(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::InvalidSource(m.into()));
        if self.spot.is_none() && !(self.rx_rms > 0.0 && self.ry_rms > 0.0 && self.rx_rms.is_finite() && self.ry_rms.is_finite()) {
            return bad("RMS radii must be positive and finite");
        }
        if let Some(s) = &self.spot {
            if s.is_empty() || s.iter().flatten().any(|v| !v.is_finite()) {
                return bad("spot data must be non-empty and finite");
            }
        }
        if !(self.sigma_t >= 0.0 && self.sigma_t.is_finite()) {
            return bad("emission-time spread must be finite and ≥ 0");
        }
        if !(self.charge >= 0.0 && self.charge.is_finite() && self.z_cathode.is_finite()) {
            return bad("charge must be ≥ 0 and the cathode plane finite");
        }
        Ok(())
    }
}

/// Draws `n` macroparticles at rest on the cathode plane. Positions come from an
/// elliptical Gaussian or from the spot samples; emission times are Gaussian
/// around zero.
pub fn sample_bunch(source: &BunchSource, n: usize, seed: u64) -> Result<Vec<Macroparticle>, TrackError> {
    source.check()?;
    if n == 0 {
        return Err(TrackError::InvalidSource("need at least one particle".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bunch = (0..n)
        .map(|_| {
            let [x, y] = match &source.spot {
                Some(s) => s[rng.random_range(0..s.len())],
                None => {
                    let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                    [source.rx_rms * a, source.ry_rms * b]
                }
            };
            let t: f64 = rng.sample(StandardNormal);
            Macroparticle {
                position: [x, y, source.z_cathode],
                momentum: [0.0; 3],
                t_emit: source.sigma_t * t,
                alive: true,
            }
        })
        .collect();
    Ok(bunch)
}

/// Reads `x,y` rows in m. Blank lines, `#` comments and a non-numeric header row
/// are skipped.
pub fn read_spot_csv(path: &Path) -> Result<Vec<[f64; 2]>, TrackError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => out.push([v[0], v[1]]),
            None if out.is_empty() && k == 0 => continue,
            _ => {
                return Err(TrackError::Parse {
                    line: k + 1,
                    msg: "expected two finite numbers `x,y`".into(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(TrackError::Parse {
            line: 0,
            msg: "no samples".into(),
        });
    }
    Ok(out)
}
