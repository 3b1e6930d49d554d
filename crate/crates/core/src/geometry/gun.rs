//! Benchmark inverted-insulator gun cross-section.
//!
//! Coordinates are (ρ, z) in meters with the cathode face at z = 0 and the anode
//! plate at z = gap. Only the gap and the anode aperture are published values;
//! every other default is a choice of this crate.

use serde::{Deserialize, Serialize};

use super::design::{extract_design, DesignVector};
use super::model::{
    BoundarySide, BoundaryTag, Coord, CurveRef, DesignEntry, DesignMap, Interface, Material, MultiPatchModel, Patch,
    PatchSide, RowBlend, EPS0,
};
use super::region::RegionConfig;
use super::GeometryError;
use crate::spline::{chord_length_params, least_squares_fit_pinned, Direction, FitResult, KnotVector, NurbsCurve, NurbsSurface, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GunConfig {
    /// Cathode plane to anode plate distance.
    pub gap: f64,
    /// Radius of the anode aperture (and of the flat cathode face).
    pub aperture_radius: f64,
    /// Length of the beam tube behind the anode plate.
    pub tube_length: f64,
    pub chamber_radius: f64,
    /// z of the chamber floor carrying the insulator.
    pub chamber_bottom: f64,
    /// Outer radius of the flat electrode design.
    pub electrode_radius: f64,
    /// Distance from the cathode plane to the electrode back face.
    pub electrode_depth: f64,
    /// Fillet radius of the front electrode corner in the flat design.
    pub front_corner_radius: f64,
    /// Fillet radius where the electrode side meets the 45° chamfer.
    pub chamfer_corner_radius: f64,
    /// Radius of the electrode-insulator-vacuum junction.
    pub triple_point_radius: f64,
    pub insulator_base_radius: f64,
    /// Radius at which the auxiliary arc around the electrode meets the back plane.
    pub arc_end_radius: f64,
    /// Radius splitting the chamber floor between the two rear vacuum patches.
    pub floor_split_radius: f64,
    /// Relative permittivity of the insulator.
    pub eps_insulator_rel: f64,
    /// Position of the middle control row of the graded quadratic directions.
    pub grading: f64,
    pub curve_degree: usize,
    pub fit_samples: usize,
    /// Half-width of the box around each free control coordinate.
    pub design_bound: f64,
    pub region: RegionConfig,
}

impl Default for GunConfig {
    fn default() -> Self {
        GunConfig {
            gap: 0.080,
            aperture_radius: 0.010,
            tube_length: 0.050,
            chamber_radius: 0.150,
            chamber_bottom: -0.220,
            electrode_radius: 0.050,
            electrode_depth: 0.0916,
            front_corner_radius: 0.008,
            chamfer_corner_radius: 0.004,
            triple_point_radius: 0.025,
            insulator_base_radius: 0.070,
            arc_end_radius: 0.100,
            floor_split_radius: 0.110,
            eps_insulator_rel: 9.0,
            grading: 0.25,
            curve_degree: 7,
            fit_samples: 400,
            design_bound: 0.020,
            region: RegionConfig::default(),
        }
    }
}

pub const PATCH_INSULATOR: usize = 0;
pub const PATCH_FRONT: usize = 1;
pub const PATCH_TUBE: usize = 2;
pub const PATCH_CAP: usize = 3;
pub const PATCH_OUTER: usize = 4;
pub const PATCH_INSULATOR_VACUUM: usize = 5;
pub const PATCH_WALL_VACUUM: usize = 6;

pub const INSULATOR_SURFACE: &str = "insulator_surface";

/// Smallest radial offset of the second electrode control point from the face edge.
const EDGE_CLEARANCE: f64 = 1e-4;

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]]
}

impl GunConfig {
    pub fn check(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidConfig(m.to_string()));
        let positive = [
            self.gap,
            self.aperture_radius,
            self.tube_length,
            self.chamber_radius,
            self.electrode_radius,
            self.electrode_depth,
            self.front_corner_radius,
            self.chamfer_corner_radius,
            self.triple_point_radius,
            self.insulator_base_radius,
            self.eps_insulator_rel,
            self.design_bound,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("dimensions must be positive and finite");
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return bad("grading must lie in (0, 1)");
        }
        if self.curve_degree < 2 {
            return bad("curve degree must be at least 2");
        }
        if self.fit_samples < 4 * (self.curve_degree + 1) {
            return bad("too few fit samples for the curve degree");
        }
        let z_eb = -self.electrode_depth;
        if !(self.chamber_bottom < z_eb) {
            return bad("electrode must end above the chamber floor");
        }
        if !(self.aperture_radius < self.triple_point_radius
            && self.triple_point_radius < self.electrode_radius
            && self.electrode_radius < self.arc_end_radius
            && self.arc_end_radius < self.chamber_radius)
        {
            return bad("radii must satisfy aperture < triple point < electrode < arc end < chamber");
        }
        if !(self.insulator_base_radius < self.floor_split_radius && self.floor_split_radius < self.chamber_radius) {
            return bad("radii must satisfy insulator base < floor split < chamber");
        }
        let chamfer = self.electrode_radius - self.triple_point_radius;
        let side_len = self.electrode_depth - chamfer;
        if side_len <= self.front_corner_radius + self.chamfer_corner_radius {
            return bad("electrode side too short for the chamfer and fillets");
        }
        if self.electrode_radius - self.aperture_radius <= self.front_corner_radius {
            return bad("front face too narrow for the corner fillet");
        }
        self.region.check()?;
        Ok(())
    }

    fn points(&self) -> GunPoints {
        let z_eb = -self.electrode_depth;
        let a = [self.aperture_radius, 0.0];
        let b = [self.aperture_radius, self.gap];
        let c = [self.chamber_radius, self.gap];
        let d = [self.chamber_radius, z_eb];
        let e = [self.chamber_radius, self.chamber_bottom];
        let f = [self.insulator_base_radius, self.chamber_bottom];
        let t = [self.triple_point_radius, z_eb];
        let tout = [self.arc_end_radius, z_eb];
        let tb = [self.floor_split_radius, self.chamber_bottom];
        GunPoints {
            a,
            b,
            c,
            d,
            e,
            f,
            t,
            tout,
            tb,
        }
    }
}

struct GunPoints {
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
    d: [f64; 2],
    e: [f64; 2],
    f: [f64; 2],
    t: [f64; 2],
    tout: [f64; 2],
    tb: [f64; 2],
}

/// Densely sampled polyline with circular fillets at the interior vertices.
pub fn filleted_polyline(vertices: &[[f64; 2]], radii: &[f64], n_samples: usize) -> Vec<[f64; 2]> {
    assert_eq!(radii.len() + 2, vertices.len());
    // build a piecewise path of segments and arcs, then resample uniformly in arclength
    enum Piece {
        Line([f64; 2], [f64; 2]),
        Arc { center: [f64; 2], r: f64, a0: f64, sweep: f64 },
    }
    let mut pieces = Vec::new();
    let mut cursor = vertices[0];
    for k in 1..vertices.len() - 1 {
        let v = vertices[k];
        let d1 = unit([v[0] - vertices[k - 1][0], v[1] - vertices[k - 1][1]]);
        let d2 = unit([vertices[k + 1][0] - v[0], vertices[k + 1][1] - v[1]]);
        let cross = d1[0] * d2[1] - d1[1] * d2[0];
        let turn = cross.atan2(d1[0] * d2[0] + d1[1] * d2[1]);
        let r = radii[k - 1];
        let t = r * (turn.abs() / 2.0).tan();
        let p0 = [v[0] - t * d1[0], v[1] - t * d1[1]];
        let p1 = [v[0] + t * d2[0], v[1] + t * d2[1]];
        let normal = if cross < 0.0 { [d1[1], -d1[0]] } else { [-d1[1], d1[0]] };
        let center = [p0[0] + r * normal[0], p0[1] + r * normal[1]];
        pieces.push(Piece::Line(cursor, p0));
        let a0 = (p0[1] - center[1]).atan2(p0[0] - center[0]);
        pieces.push(Piece::Arc {
            center,
            r,
            a0,
            sweep: turn,
        });
        cursor = p1;
    }
    pieces.push(Piece::Line(cursor, *vertices.last().unwrap()));
    let lengths: Vec<f64> = pieces
        .iter()
        .map(|p| match p {
            Piece::Line(a, b) => (b[0] - a[0]).hypot(b[1] - a[1]),
            Piece::Arc { r, sweep, .. } => r * sweep.abs(),
        })
        .collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut s = total * k as f64 / (n_samples - 1) as f64;
        let mut idx = 0;
        while idx + 1 < pieces.len() && s > lengths[idx] {
            s -= lengths[idx];
            idx += 1;
        }
        let f = if lengths[idx] > 0.0 { (s / lengths[idx]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(match &pieces[idx] {
            Piece::Line(a, b) => lerp(*a, *b, f),
            Piece::Arc { center, r, a0, sweep } => {
                let ang = a0 + f * sweep;
                [center[0] + r * ang.cos(), center[1] + r * ang.sin()]
            }
        });
    }
    *out.last_mut().unwrap() = *vertices.last().unwrap();
    out
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Samples of the flat electrode profile from the cathode-face edge to the triple point.
pub fn flat_profile(cfg: &GunConfig) -> Vec<[f64; 2]> {
    let p = cfg.points();
    let z_chamfer = p.t[1] + (cfg.electrode_radius - cfg.triple_point_radius);
    let verts = [p.a, [cfg.electrode_radius, 0.0], [cfg.electrode_radius, z_chamfer], p.t];
    filleted_polyline(&verts, &[cfg.front_corner_radius, cfg.chamfer_corner_radius], cfg.fit_samples)
}

/// Least-squares fit of a sampled profile by a single polynomial piece of `degree`
/// with chord-length parameters, pinned endpoints, and the second control point on
/// the plane of the first sample so the curve leaves the cathode face tangentially.
pub fn fit_profile(points: &[[f64; 2]], degree: usize) -> Result<FitResult, GeometryError> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(GeometryError::InvalidConfig("empty profile".into()));
    };
    let params = chord_length_params(points);
    let samples: Vec<(f64, [f64; 2])> = params.into_iter().zip(points.iter().copied()).collect();
    let n = degree + 1;
    let mut fixed = vec![[None, None]; n];
    fixed[0] = [Some(first[0]), Some(first[1])];
    fixed[n - 1] = [Some(last[0]), Some(last[1])];
    fixed[1][1] = Some(first[1]);
    Ok(least_squares_fit_pinned(&samples, &KnotVector::bezier(degree), &fixed)?)
}

/// Builds the benchmark model with its electrode curve fitted to the flat design.
pub fn build_gun_model(cfg: &GunConfig) -> Result<(MultiPatchModel, DesignVector), GeometryError> {
    cfg.check()?;
    let fit = fit_profile(&flat_profile(cfg), cfg.curve_degree)?;
    build_gun_model_with_curve(cfg, &fit.curve)
}

/// Builds the benchmark model around a given electrode curve running from the
/// cathode-face edge to the triple point.
pub fn build_gun_model_with_curve(
    cfg: &GunConfig,
    curve: &NurbsCurve,
) -> Result<(MultiPatchModel, DesignVector), GeometryError> {
    cfg.check()?;
    let p = cfg.points();
    let s = cfg.grading;
    let scale = cfg.chamber_radius;
    let near = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() <= 1e-12 * scale && (a[1] - b[1]).abs() <= 1e-12 * scale;
    if !near(curve.start(), p.a) || !near(curve.end(), p.t) {
        return Err(GeometryError::InvalidConfig(
            "electrode curve must run from the cathode-face edge to the triple point".into(),
        ));
    }
    let mut cap_pts = curve.points().to_vec();
    cap_pts[0] = p.a;
    *cap_pts.last_mut().unwrap() = p.t;
    let cap_curve = curve.with_points(cap_pts)?;
    let z_eb = p.t[1];

    // auxiliary arc from the aperture edge around the electrode to the back plane
    let k = [p.tout[0], p.b[1] - (p.tout[0] - p.b[0])];
    if !(k[1] > z_eb) {
        return Err(GeometryError::InvalidConfig("gap too small for the auxiliary arc".into()));
    }
    let arc2 = NurbsCurve::polynomial(KnotVector::bezier(2), vec![p.b, k, p.tout])?;
    let (cap_curve, arc) = NurbsCurve::make_compatible(&cap_curve, &arc2)?;
    let mid = cap_curve.with_points(
        cap_curve
            .points()
            .iter()
            .zip(arc.points())
            .map(|(&a, &b)| lerp(a, b, s))
            .collect(),
    )?;
    let graded = KnotVector::bezier(2);
    let cap = NurbsSurface::from_rows(&[cap_curve.clone(), mid, arc.clone()], graded.clone())?;

    let z0 = [0.0, 0.0];
    let zg = [0.0, cfg.gap];
    let front = NurbsSurface::from_rows(
        &[
            NurbsCurve::line(z0, p.a),
            NurbsCurve::line(lerp(z0, zg, s), lerp(p.a, p.b, s)),
            NurbsCurve::line(zg, p.b),
        ],
        graded.clone(),
    )?;
    let exit = cfg.gap + cfg.tube_length;
    let tube = NurbsSurface::bilinear(zg, p.b, [0.0, exit], [p.b[0], exit]);
    let outer = NurbsSurface::ruled(&arc, &NurbsCurve::line(p.c, p.d))?;
    let insulator = NurbsSurface::bilinear([0.0, cfg.chamber_bottom], p.f, [0.0, z_eb], p.t);
    let quad = |a: [f64; 2], b: [f64; 2]| NurbsCurve::polynomial(graded.clone(), vec![a, lerp(a, b, s), b]);
    let ins_vac = NurbsSurface::from_rows(&[quad(p.f, p.tb)?, quad(p.t, p.tout)?], KnotVector::bezier(1))?;
    let wall_vac = NurbsSurface::bilinear(p.tb, p.e, p.tout, p.d);

    let patch = |name: &str, surface: NurbsSurface, material| Patch {
        name: name.into(),
        surface,
        material,
    };
    let patches = vec![
        patch("insulator", insulator, Material::Insulator),
        patch("front", front, Material::Vacuum),
        patch("tube", tube, Material::Vacuum),
        patch("cap", cap, Material::Vacuum),
        patch("outer", outer, Material::Vacuum),
        patch("insulator_vacuum", ins_vac, Material::Vacuum),
        patch("wall_vacuum", wall_vac, Material::Vacuum),
    ];
    let ps = |patch, side| PatchSide { patch, side };
    let itf = |a, b, name: Option<&str>| Interface {
        a,
        b,
        reversed: false,
        name: name.map(str::to_string),
    };
    let interfaces = vec![
        itf(
            ps(PATCH_INSULATOR, Side::XiMax),
            ps(PATCH_INSULATOR_VACUUM, Side::XiMin),
            Some(INSULATOR_SURFACE),
        ),
        itf(ps(PATCH_FRONT, Side::XiMax), ps(PATCH_CAP, Side::XiMin), None),
        itf(ps(PATCH_FRONT, Side::EtaMax), ps(PATCH_TUBE, Side::EtaMin), None),
        itf(ps(PATCH_CAP, Side::XiMax), ps(PATCH_INSULATOR_VACUUM, Side::EtaMax), None),
        itf(ps(PATCH_CAP, Side::EtaMax), ps(PATCH_OUTER, Side::EtaMin), None),
        itf(ps(PATCH_INSULATOR_VACUUM, Side::XiMax), ps(PATCH_WALL_VACUUM, Side::XiMin), None),
        itf(ps(PATCH_OUTER, Side::XiMax), ps(PATCH_WALL_VACUUM, Side::EtaMax), None),
    ];
    use BoundaryTag::*;
    let tag = |patch, side, tag| BoundarySide { patch, side, tag };
    let boundaries = vec![
        tag(PATCH_INSULATOR, Side::XiMin, Axis),
        tag(PATCH_INSULATOR, Side::EtaMin, GammaD0),
        tag(PATCH_INSULATOR, Side::EtaMax, GammaD1),
        tag(PATCH_FRONT, Side::XiMin, Axis),
        tag(PATCH_FRONT, Side::EtaMin, GammaD1),
        tag(PATCH_TUBE, Side::XiMin, Axis),
        tag(PATCH_TUBE, Side::XiMax, GammaD2),
        tag(PATCH_TUBE, Side::EtaMax, Natural),
        tag(PATCH_CAP, Side::EtaMin, GammaD1),
        tag(PATCH_OUTER, Side::XiMin, GammaD2),
        tag(PATCH_OUTER, Side::EtaMax, GammaD0),
        tag(PATCH_INSULATOR_VACUUM, Side::EtaMin, GammaD0),
        tag(PATCH_WALL_VACUUM, Side::EtaMin, GammaD0),
        tag(PATCH_WALL_VACUUM, Side::XiMax, GammaD0),
    ];
    let mut model = MultiPatchModel {
        patches,
        interfaces,
        boundaries,
        eps_vacuum: EPS0,
        eps_insulator: cfg.eps_insulator_rel * EPS0,
        triple_point: Some(p.t),
        electrode_loop: vec![
            CurveRef {
                patch: PATCH_FRONT,
                side: Side::EtaMin,
                reversed: false,
            },
            CurveRef {
                patch: PATCH_CAP,
                side: Side::EtaMin,
                reversed: false,
            },
            CurveRef {
                patch: PATCH_INSULATOR,
                side: Side::EtaMax,
                reversed: true,
            },
        ],
        design: DesignMap::default(),
    };
    model.design = electrode_design_map(&model, &model, cfg.design_bound, s);
    let diag = model.validate();
    if !diag.ok() {
        return Err(GeometryError::InvalidGeometry(diag.summary()));
    }
    let design = extract_design(&model);
    Ok((model, design))
}

/// Design map over the interior control points of the electrode curve, with bounds
/// `±bound` around the matching control points of `reference`.
pub fn electrode_design_map(model: &MultiPatchModel, reference: &MultiPatchModel, bound: f64, grading: f64) -> DesignMap {
    let cap = &model.patches[PATCH_CAP].surface;
    let refc = &reference.patches[PATCH_CAP].surface;
    let n = cap.shape().0;
    let mut entries = Vec::new();
    let edge = cap.point(0, 0);
    for i in 1..n - 1 {
        let r = refc.point(i, 0);
        for (coord, c) in [(Coord::Rho, 0), (Coord::Z, 1)] {
            // the second point stays on the cathode plane, outside the face edge,
            // which keeps the electrode tangent to the face
            if i == 1 && coord == Coord::Z {
                continue;
            }
            let lower = match (i, coord) {
                (1, _) => (r[c] - bound).max(edge[0] + EDGE_CLEARANCE),
                (_, Coord::Rho) => (r[c] - bound).max(0.0),
                _ => r[c] - bound,
            };
            entries.push(DesignEntry {
                patch: PATCH_CAP,
                i,
                j: 0,
                coord,
                lower,
                upper: r[c] + bound,
            });
        }
    }
    DesignMap {
        entries,
        blends: vec![RowBlend {
            patch: PATCH_CAP,
            row: 1,
            from_row: 0,
            to_row: 2,
            s: grading,
        }],
        curve_patch: Some(PATCH_CAP),
    }
}

/// Refinement applied to the electrode curve of a gun model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveRefinement {
    Elevate(usize),
    HalveIntervals,
}

/// Refines the electrode curve (and the patch sharing its auxiliary arc) in ξ; the
/// mapped geometry is unchanged. The design map is rebuilt with bounds `±bound`
/// around the refined control points.
pub fn refine_electrode(model: &MultiPatchModel, r: CurveRefinement, bound: f64) -> Result<MultiPatchModel, GeometryError> {
    let mut out = model.clone();
    for k in [PATCH_CAP, PATCH_OUTER] {
        let s = &out.patches[k].surface;
        out.patches[k].surface = match r {
            CurveRefinement::Elevate(t) => s.elevate_degree(Direction::Xi, t)?,
            CurveRefinement::HalveIntervals => s.halve_intervals(Direction::Xi),
        };
    }
    let grading = model.design.blends.first().map_or(0.25, |b| b.s);
    out.design = electrode_design_map(&out, &out, bound, grading);
    Ok(out)
}

/// Electrode curve of a gun model (cathode-face edge to triple point).
pub fn electrode_curve(model: &MultiPatchModel) -> NurbsCurve {
    model.patches[PATCH_CAP].surface.boundary_curve(Side::EtaMin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_design, electrode_volume};

    #[test]
    fn default_dimensions() {
        let cfg = GunConfig::default();
        let (m, d) = build_gun_model(&cfg).unwrap();
        // cathode plane and anode plate
        let cath = m.patches[PATCH_FRONT].surface.boundary_curve(Side::EtaMin);
        let anode = m.patches[PATCH_OUTER].surface.boundary_curve(Side::XiMin);
        assert_eq!(cath.start()[1], 0.0);
        assert!((anode.start()[1] - cath.start()[1] - 0.080).abs() < 1e-15);
        assert!((anode.start()[0] - 0.010).abs() < 1e-15);
        let tube = m.patches[PATCH_TUBE].surface.boundary_curve(Side::XiMax);
        assert!(tube.points().iter().all(|p| (p[0] - 0.010).abs() < 1e-15));
        // the second control point moves along the cathode plane only
        assert_eq!(d.len(), 2 * (cfg.curve_degree - 1) - 1);
        let curve = electrode_curve(&m);
        assert_eq!(curve.points()[1][1], 0.0);
        assert!(curve.points()[1][0] > 0.010);
        let diag = m.validate();
        assert!(diag.ok(), "{}", diag.summary());
    }

    #[test]
    fn triple_point_on_electrode_insulator_interface() {
        let (m, _) = build_gun_model(&GunConfig::default()).unwrap();
        let tp = m.triple_point.unwrap();
        let top = m.patches[PATCH_INSULATOR].surface.boundary_curve(Side::EtaMax);
        assert_eq!(top.end(), tp);
        let surf = m.patches[PATCH_INSULATOR].surface.boundary_curve(Side::XiMax);
        assert_eq!(surf.end(), tp);
        assert_eq!(electrode_curve(&m).end(), tp);
    }

    #[test]
    fn initial_volume_slightly_above_cap() {
        let (m, _) = build_gun_model(&GunConfig::default()).unwrap();
        let v = electrode_volume(&m).unwrap() * 1e6;
        assert!(v > 625.0 && v < 640.0, "volume {v} cm³");
    }

    #[test]
    fn identity_design_is_noop() {
        let (m, d) = build_gun_model(&GunConfig::default()).unwrap();
        let m2 = apply_design(&m, &d).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn perturbation_only_moves_cap_patch() {
        let (m, d) = build_gun_model(&GunConfig::default()).unwrap();
        let mut v = d.values.clone();
        v[4] += 0.001;
        let m2 = apply_design(&m, &d.with_values(v.clone())).unwrap();
        for k in 0..m.patches.len() {
            if k == PATCH_CAP {
                assert_ne!(m.patches[k], m2.patches[k]);
            } else {
                assert_eq!(m.patches[k], m2.patches[k]);
            }
        }
        assert!(m2.validate().ok());
        assert_eq!(extract_design(&m2).values, v);
        let c = electrode_curve(&m2);
        assert_eq!(c.start(), electrode_curve(&m).start());
        assert_eq!(c.end(), electrode_curve(&m).end());
    }

    #[test]
    fn out_of_bounds_rejected() {
        let (m, d) = build_gun_model(&GunConfig::default()).unwrap();
        let mut v = d.values.clone();
        v[0] = d.lower[0] - 1e-6;
        assert!(matches!(
            apply_design(&m, &d.with_values(v)),
            Err(GeometryError::OutOfBounds { index: 0, .. })
        ));
    }

    #[test]
    fn refinement_keeps_volume_and_conformity() {
        let (m, _) = build_gun_model(&GunConfig::default()).unwrap();
        let v0 = electrode_volume(&m).unwrap();
        for r in [CurveRefinement::Elevate(1), CurveRefinement::HalveIntervals] {
            let m2 = refine_electrode(&m, r, 0.02).unwrap();
            assert!(m2.validate().ok(), "{}", m2.validate().summary());
            assert!((electrode_volume(&m2).unwrap() - v0).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = GunConfig {
            electrode_radius: 0.2,
            ..GunConfig::default()
        };
        assert!(matches!(build_gun_model(&cfg), Err(GeometryError::InvalidConfig(_))));
    }
}
