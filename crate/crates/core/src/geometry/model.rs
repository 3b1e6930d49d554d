use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::spline::{NurbsCurve, NurbsSurface, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Vacuum,
    Insulator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    /// Grounded chamber.
    GammaD0,
    /// Electrode (cathode potential).
    GammaD1,
    /// Anode.
    GammaD2,
    Axis,
    Natural,
}

impl BoundaryTag {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, BoundaryTag::GammaD0 | BoundaryTag::GammaD1 | BoundaryTag::GammaD2)
    }

    /// Priority used where Dirichlet sides meet at a shared corner; higher wins.
    pub fn priority(self) -> u8 {
        match self {
            BoundaryTag::GammaD1 => 3,
            BoundaryTag::GammaD2 => 2,
            BoundaryTag::GammaD0 => 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchSide {
    pub patch: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub a: PatchSide,
    pub b: PatchSide,
    /// Whether the running parameters of the two sides are opposite.
    pub reversed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySide {
    pub patch: usize,
    pub side: Side,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub name: String,
    pub surface: NurbsSurface,
    pub material: Material,
}

/// Reference to a patch side used as a boundary curve, optionally traversed backwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRef {
    pub patch: usize,
    pub side: Side,
    pub reversed: bool,
}

/// Which coordinate of a control point a design variable drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    Rho,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub patch: usize,
    pub i: usize,
    pub j: usize,
    pub coord: Coord,
    pub lower: f64,
    pub upper: f64,
}

/// Control row `row` of `patch` is recomputed as `(1 - s) * row_from + s * row_to`
/// whenever the design changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowBlend {
    pub patch: usize,
    pub row: usize,
    pub from_row: usize,
    pub to_row: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignMap {
    pub entries: Vec<DesignEntry>,
    pub blends: Vec<RowBlend>,
    /// Patch and row holding the designable electrode curve.
    pub curve_patch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPatchModel {
    pub patches: Vec<Patch>,
    pub interfaces: Vec<Interface>,
    pub boundaries: Vec<BoundarySide>,
    /// Vacuum permittivity in F/m.
    pub eps_vacuum: f64,
    /// Insulator permittivity in F/m.
    pub eps_insulator: f64,
    pub triple_point: Option<[f64; 2]>,
    /// Closed boundary of the electrode cross-section; gaps along the axis are allowed.
    #[serde(default)]
    pub electrode_loop: Vec<CurveRef>,
    #[serde(default)]
    pub design: DesignMap,
}

pub const EPS0: f64 = 8.8541878128e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub min_jacobian: Vec<f64>,
    pub negative_jacobian: Vec<usize>,
    pub conformity_violations: Vec<String>,
    pub untagged_sides: Vec<PatchSide>,
    pub multiply_tagged_sides: Vec<PatchSide>,
    pub axis_violations: Vec<PatchSide>,
    pub negative_rho: Vec<usize>,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.negative_jacobian.is_empty()
            && self.conformity_violations.is_empty()
            && self.untagged_sides.is_empty()
            && self.multiply_tagged_sides.is_empty()
            && self.axis_violations.is_empty()
            && self.negative_rho.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.negative_jacobian.is_empty() {
            parts.push(format!("non-positive Jacobian in patches {:?}", self.negative_jacobian));
        }
        for v in &self.conformity_violations {
            parts.push(v.clone());
        }
        if !self.untagged_sides.is_empty() {
            parts.push(format!("{} untagged sides", self.untagged_sides.len()));
        }
        if !self.multiply_tagged_sides.is_empty() {
            parts.push(format!("{} sides tagged more than once", self.multiply_tagged_sides.len()));
        }
        if !self.axis_violations.is_empty() {
            parts.push(format!("{} axis sides off the axis", self.axis_violations.len()));
        }
        if !self.negative_rho.is_empty() {
            parts.push(format!("negative ρ in patches {:?}", self.negative_rho));
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Gauss-Legendre abscissae on [0, 1] used for Jacobian sampling.
// cell corners plus the interior Gauss-Lobatto nodes of order 6
const SAMPLE_NODES: [f64; 6] = [0.0, 0.117_472_338_035_267_65, 0.357_384_241_759_677_45, 0.642_615_758_240_322_5, 0.882_527_661_964_732_3, 1.0];
const SAMPLE_CELLS: usize = 16;

impl MultiPatchModel {
    pub fn patch_index(&self, name: &str) -> Option<usize> {
        self.patches.iter().position(|p| p.name == name)
    }

    pub fn permittivity(&self, patch: usize) -> f64 {
        match self.patches[patch].material {
            Material::Vacuum => self.eps_vacuum,
            Material::Insulator => self.eps_insulator,
        }
    }

    pub fn tag_of(&self, patch: usize, side: Side) -> Option<BoundaryTag> {
        self.boundaries
            .iter()
            .find(|b| b.patch == patch && b.side == side)
            .map(|b| b.tag)
    }

    pub fn interface_by_name(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name.as_deref() == Some(name))
    }

    pub fn side_curve(&self, r: CurveRef) -> NurbsCurve {
        let c = self.patches[r.patch].surface.boundary_curve(r.side);
        if r.reversed {
            c.reversed()
        } else {
            c
        }
    }

    /// Characteristic length (bounding-box diagonal of all control points).
    pub fn length_scale(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.patches {
            for q in p.surface.points() {
                for c in 0..2 {
                    lo[c] = lo[c].min(q[c]);
                    hi[c] = hi[c].max(q[c]);
                }
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Smallest Jacobian determinant over the sampling grid of one patch.
    pub fn min_jacobian(&self, patch: usize) -> f64 {
        let s = &self.patches[patch].surface;
        let mut m = f64::INFINITY;
        for cu in 0..SAMPLE_CELLS {
            for cv in 0..SAMPLE_CELLS {
                for gu in SAMPLE_NODES {
                    for gv in SAMPLE_NODES {
                        if (gu == 1.0 && cu + 1 < SAMPLE_CELLS) || (gv == 1.0 && cv + 1 < SAMPLE_CELLS) {
                            continue;
                        }
                        let xi = (cu as f64 + gu) / SAMPLE_CELLS as f64;
                        let eta = (cv as f64 + gv) / SAMPLE_CELLS as f64;
                        let sp = s.eval_jacobian(xi, eta).expect("parameter in range");
                        m = m.min(sp.det());
                    }
                }
            }
        }
        m
    }

    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        let tol = 1e-12 * self.length_scale().max(1.0);
        for (k, p) in self.patches.iter().enumerate() {
            let mj = self.min_jacobian(k);
            d.min_jacobian.push(mj);
            if !(mj > 0.0) {
                d.negative_jacobian.push(k);
            }
            if p.surface.points().iter().any(|q| q[0] < -tol) {
                d.negative_rho.push(k);
            }
        }
        let mut count: HashMap<PatchSide, usize> = HashMap::new();
        for b in &self.boundaries {
            *count
                .entry(PatchSide {
                    patch: b.patch,
                    side: b.side,
                })
                .or_default() += 1;
            if b.tag == BoundaryTag::Axis {
                let c = self.patches[b.patch].surface.boundary_curve(b.side);
                if c.points().iter().any(|q| q[0].abs() > tol) {
                    d.axis_violations.push(PatchSide {
                        patch: b.patch,
                        side: b.side,
                    });
                }
            }
        }
        for itf in &self.interfaces {
            *count.entry(itf.a).or_default() += 1;
            *count.entry(itf.b).or_default() += 1;
            if let Err(e) = self.check_interface(itf, tol) {
                d.conformity_violations.push(e);
            }
        }
        for k in 0..self.patches.len() {
            for side in Side::ALL {
                let ps = PatchSide { patch: k, side };
                match count.get(&ps).copied().unwrap_or(0) {
                    0 => d.untagged_sides.push(ps),
                    1 => {}
                    _ => d.multiply_tagged_sides.push(ps),
                }
            }
        }
        d
    }

    fn check_interface(&self, itf: &Interface, tol: f64) -> Result<(), String> {
        let ca = self.patches[itf.a.patch].surface.boundary_curve(itf.a.side);
        let mut cb = self.patches[itf.b.patch].surface.boundary_curve(itf.b.side);
        if itf.reversed {
            cb = cb.reversed();
        }
        let label = format!(
            "interface {}:{:?} / {}:{:?}",
            self.patches[itf.a.patch].name, itf.a.side, self.patches[itf.b.patch].name, itf.b.side
        );
        if ca.degree() != cb.degree() || ca.knots().len() != cb.knots().len() {
            return Err(format!("{label}: knot vectors differ"));
        }
        if ca
            .knots()
            .knots()
            .iter()
            .zip(cb.knots().knots())
            .any(|(x, y)| (x - y).abs() > 1e-14)
        {
            return Err(format!("{label}: knot vectors differ"));
        }
        for (k, (p, q)) in ca.points().iter().zip(cb.points()).enumerate() {
            if (p[0] - q[0]).abs() > tol || (p[1] - q[1]).abs() > tol {
                return Err(format!("{label}: control point {k} mismatch"));
            }
        }
        for (w1, w2) in ca.weights().iter().zip(cb.weights()) {
            if (w1 - w2).abs() > 1e-12 * w1.abs() {
                return Err(format!("{label}: weights differ"));
            }
        }
        Ok(())
    }

    /// Parametric coordinates of a physical point in one patch by Newton iteration.
    pub fn invert_point(&self, patch: usize, x: [f64; 2]) -> Option<(f64, f64)> {
        let s = &self.patches[patch].surface;
        let scale = self.length_scale();
        // coarse seed
        let n = 12;
        let mut best = (f64::INFINITY, 0.5, 0.5);
        for a in 0..=n {
            for b in 0..=n {
                let (u, v) = (a as f64 / n as f64, b as f64 / n as f64);
                let p = s.eval(u, v).ok()?;
                let d = (p[0] - x[0]).hypot(p[1] - x[1]);
                if d < best.0 {
                    best = (d, u, v);
                }
            }
        }
        let (_, mut u, mut v) = best;
        for _ in 0..60 {
            let sp = s.eval_jacobian(u, v).ok()?;
            let r = [x[0] - sp.point[0], x[1] - sp.point[1]];
            if r[0].hypot(r[1]) <= 1e-13 * scale {
                break;
            }
            let det = sp.det();
            if det.abs() < 1e-300 {
                return None;
            }
            let du = (sp.jac[1][1] * r[0] - sp.jac[0][1] * r[1]) / det;
            let dv = (-sp.jac[1][0] * r[0] + sp.jac[0][0] * r[1]) / det;
            u = (u + du).clamp(0.0, 1.0);
            v = (v + dv).clamp(0.0, 1.0);
        }
        let p = s.eval(u, v).ok()?;
        if (p[0] - x[0]).hypot(p[1] - x[1]) <= 1e-10 * scale {
            Some((u, v))
        } else {
            None
        }
    }

    /// First patch (in order) containing `x`, restricted to `material` when given.
    pub fn locate(&self, x: [f64; 2], material: Option<Material>) -> Option<(usize, f64, f64)> {
        self.patches.iter().enumerate().find_map(|(k, p)| {
            if material.is_some_and(|m| m != p.material) {
                return None;
            }
            self.invert_point(k, x).map(|(u, v)| (k, u, v))
        })
    }

    /// Applies `f` to every control point of every patch.
    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2] + Copy) -> MultiPatchModel {
        let mut m = self.clone();
        for p in m.patches.iter_mut() {
            p.surface = p.surface.map_points(f);
        }
        m.triple_point = m.triple_point.map(f);
        m
    }

    pub fn to_json(&self) -> Result<String, GeometryError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, GeometryError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, GeometryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
