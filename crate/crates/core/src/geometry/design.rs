use serde::{Deserialize, Serialize};

use super::model::{Coord, MultiPatchModel};
use super::GeometryError;

/// Free electrode control-point coordinates with their box bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DesignVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> DesignVector {
        DesignVector {
            values,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    pub fn check_bounds(&self) -> Result<(), GeometryError> {
        for (k, ((&v, &lo), &hi)) in self.values.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(GeometryError::OutOfBounds {
                    index: k,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

/// Current design values of a model together with the bounds of its design map.
pub fn extract_design(model: &MultiPatchModel) -> DesignVector {
    let e = &model.design.entries;
    let values = e
        .iter()
        .map(|d| {
            let p = model.patches[d.patch].surface.point(d.i, d.j);
            match d.coord {
                Coord::Rho => p[0],
                Coord::Z => p[1],
            }
        })
        .collect();
    DesignVector {
        values,
        lower: e.iter().map(|d| d.lower).collect(),
        upper: e.iter().map(|d| d.upper).collect(),
    }
}

/// Writes the design into the electrode control points, re-blends dependent rows,
/// and rejects designs that fold a patch.
pub fn apply_design(model: &MultiPatchModel, d: &DesignVector) -> Result<MultiPatchModel, GeometryError> {
    let entries = &model.design.entries;
    if d.len() != entries.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: entries.len(),
            got: d.len(),
        });
    }
    let bounded = DesignVector {
        values: d.values.clone(),
        lower: entries.iter().map(|e| e.lower).collect(),
        upper: entries.iter().map(|e| e.upper).collect(),
    };
    bounded.check_bounds()?;
    let mut out = model.clone();
    let mut touched = Vec::new();
    for (e, &v) in entries.iter().zip(&d.values) {
        let s = &mut out.patches[e.patch].surface;
        let mut p = s.point(e.i, e.j);
        match e.coord {
            Coord::Rho => p[0] = v,
            Coord::Z => p[1] = v,
        }
        if p[0] < 0.0 {
            return Err(GeometryError::InvalidGeometry(format!(
                "control point ({}, {}) of patch {} has negative ρ",
                e.i, e.j, e.patch
            )));
        }
        s.set_point(e.i, e.j, p);
        if !touched.contains(&e.patch) {
            touched.push(e.patch);
        }
    }
    for b in &model.design.blends {
        let s = &mut out.patches[b.patch].surface;
        let n = s.shape().0;
        for i in 0..n {
            let p = s.point(i, b.from_row);
            let q = s.point(i, b.to_row);
            s.set_point(i, b.row, [(1.0 - b.s) * p[0] + b.s * q[0], (1.0 - b.s) * p[1] + b.s * q[1]]);
        }
        if !touched.contains(&b.patch) {
            touched.push(b.patch);
        }
    }
    for &k in &touched {
        let mj = out.min_jacobian(k);
        if !(mj > 0.0) {
            return Err(GeometryError::InvalidGeometry(format!(
                "patch '{}' folds (min Jacobian {mj:.3e})",
                out.patches[k].name
            )));
        }
    }
    Ok(out)
}
