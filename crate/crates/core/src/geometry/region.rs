use serde::{Deserialize, Serialize};

use super::gun::{PATCH_CAP, PATCH_INSULATOR};
use super::model::{Material, MultiPatchModel};
use super::GeometryError;
use crate::spline::Side;

/// Parameter rectangle of one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPart {
    pub patch: usize,
    pub xi: [f64; 2],
    pub eta: [f64; 2],
}

impl RegionPart {
    pub fn whole(patch: usize) -> Self {
        RegionPart {
            patch,
            xi: [0.0, 1.0],
            eta: [0.0, 1.0],
        }
    }

    /// Whether the element `[xa, xb] × [ya, yb]` lies inside this rectangle.
    pub fn contains_element(&self, patch: usize, x: [f64; 2], y: [f64; 2]) -> bool {
        const EPS: f64 = 1e-12;
        patch == self.patch
            && x[0] >= self.xi[0] - EPS
            && x[1] <= self.xi[1] + EPS
            && y[0] >= self.eta[0] - EPS
            && y[1] <= self.eta[1] + EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub patch: usize,
    pub xi: f64,
    pub eta: f64,
    pub point: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub parts: Vec<RegionPart>,
    /// Sample points around the triple point.
    pub samples: Vec<SamplePoint>,
}

impl RegionOfInterest {
    pub fn whole_model(model: &MultiPatchModel) -> Self {
        RegionOfInterest {
            parts: (0..model.patches.len()).map(RegionPart::whole).collect(),
            samples: Vec::new(),
        }
    }

    pub fn contains_element(&self, patch: usize, x: [f64; 2], y: [f64; 2]) -> bool {
        self.parts.iter().any(|p| p.contains_element(patch, x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    /// Upper ξ limit of the sub-rectangle of the electrode-adjacent patch.
    pub xi_max: f64,
    /// Upper η limit of that sub-rectangle.
    pub eta_max: f64,
    /// Radius of the sampling arc around the triple point.
    pub tp_radius: f64,
    pub tp_samples: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            xi_max: 0.875,
            eta_max: 0.5,
            tp_radius: 1e-3,
            tp_samples: 8,
        }
    }
}

impl RegionConfig {
    pub fn check(&self) -> Result<(), GeometryError> {
        if !(self.xi_max > 0.0 && self.xi_max <= 1.0 && self.eta_max > 0.0 && self.eta_max <= 1.0) {
            return Err(GeometryError::InvalidConfig("region limits must lie in (0, 1]".into()));
        }
        if !(self.tp_radius > 0.0) || self.tp_samples == 0 {
            return Err(GeometryError::InvalidConfig(
                "triple-point sampling needs a positive radius and at least one sample".into(),
            ));
        }
        Ok(())
    }
}

fn angle(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

/// Points on an arc of radius `radius` around the triple point, spread over the
/// vacuum wedge between the electrode curve and the insulator surface.
pub fn triple_point_samples(model: &MultiPatchModel, radius: f64, n: usize) -> Result<Vec<SamplePoint>, GeometryError> {
    let tp = model
        .triple_point
        .ok_or_else(|| GeometryError::InvalidGeometry("model has no triple point".into()))?;
    let curve = model.patches[PATCH_CAP].surface.boundary_curve(Side::EtaMin);
    let ins = model.patches[PATCH_INSULATOR].surface.boundary_curve(Side::XiMax);
    let dc = curve.deriv(1.0)?;
    let di = ins.deriv(1.0)?;
    // directions leaving the triple point along each surface
    let a1 = angle([-dc[0], -dc[1]]);
    let a2 = angle([-di[0], -di[1]]);
    let tau = std::f64::consts::TAU;
    let cw = (a1 - a2).rem_euclid(tau);
    let probe = |a: f64| [tp[0] + radius * a.cos(), tp[1] + radius * a.sin()];
    let sweep = if model.locate(probe(a1 - 0.5 * cw), Some(Material::Vacuum)).is_some() {
        -cw
    } else {
        tau - cw
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = a1 + sweep * (k as f64 + 1.0) / (n as f64 + 1.0);
        let x = probe(a);
        let (patch, xi, eta) = model.locate(x, Some(Material::Vacuum)).ok_or_else(|| {
            GeometryError::InvalidGeometry(format!("triple-point sample ({:.4e}, {:.4e}) not in vacuum", x[0], x[1]))
        })?;
        out.push(SamplePoint {
            patch,
            xi,
            eta,
            point: x,
        });
    }
    Ok(out)
}

/// Region of interest of the benchmark gun: the part of the electrode-adjacent patch
/// away from the triple point, plus the triple-point samples.
pub fn gun_region(model: &MultiPatchModel, cfg: &RegionConfig) -> Result<RegionOfInterest, GeometryError> {
    cfg.check()?;
    Ok(RegionOfInterest {
        parts: vec![RegionPart {
            patch: PATCH_CAP,
            xi: [0.0, cfg.xi_max],
            eta: [0.0, cfg.eta_max],
        }],
        samples: triple_point_samples(model, cfg.tp_radius, cfg.tp_samples)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_gun_model, GunConfig};

    #[test]
    fn samples_lie_in_vacuum_on_the_arc() {
        let (m, _) = build_gun_model(&GunConfig::default()).unwrap();
        let r = gun_region(&m, &RegionConfig::default()).unwrap();
        let tp = m.triple_point.unwrap();
        assert_eq!(r.samples.len(), 8);
        for s in &r.samples {
            assert_eq!(m.patches[s.patch].material, Material::Vacuum);
            let d = (s.point[0] - tp[0]).hypot(s.point[1] - tp[1]);
            assert!((d - 1e-3).abs() < 1e-12);
            let q = m.patches[s.patch].surface.eval(s.xi, s.eta).unwrap();
            assert!((q[0] - s.point[0]).abs() < 1e-12 && (q[1] - s.point[1]).abs() < 1e-12);
        }
        assert!(r.contains_element(PATCH_CAP, [0.0, 0.125], [0.0, 0.125]));
        assert!(!r.contains_element(PATCH_CAP, [0.875, 1.0], [0.0, 0.125]));
    }
}
