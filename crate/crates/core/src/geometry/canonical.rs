//! Simple closed-form test geometries.

use super::model::{BoundarySide, BoundaryTag, DesignMap, Interface, Material, MultiPatchModel, Patch, PatchSide, EPS0};
use super::GeometryError;
use crate::spline::{KnotVector, NurbsSurface, Side};

/// Shell between concentric spheres of radii `inner < outer`, meshed as one patch:
/// ξ runs outward, η sweeps the half circle from the south pole to the north pole.
/// The inner surface is `GammaD1`, the outer one `GammaD0`.
pub fn spherical_capacitor(inner: f64, outer: f64) -> Result<MultiPatchModel, GeometryError> {
    if !(inner > 0.0 && outer > inner) {
        return Err(GeometryError::InvalidConfig("need 0 < inner < outer".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let circle = [[0.0, -1.0], [1.0, -1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let w = [1.0, s, 1.0, s, 1.0];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (c, &wk) in circle.iter().zip(&w) {
        for r in [inner, outer] {
            points.push([r * c[0], r * c[1]]);
            weights.push(wk);
        }
    }
    let eta = KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0], 2)?;
    let surface = NurbsSurface::new(KnotVector::bezier(1), eta, points, weights)?;
    let b = |side, tag| BoundarySide { patch: 0, side, tag };
    Ok(MultiPatchModel {
        patches: vec![Patch {
            name: "shell".into(),
            surface,
            material: Material::Vacuum,
        }],
        interfaces: vec![],
        boundaries: vec![
            b(Side::XiMin, BoundaryTag::GammaD1),
            b(Side::XiMax, BoundaryTag::GammaD0),
            b(Side::EtaMin, BoundaryTag::Axis),
            b(Side::EtaMax, BoundaryTag::Axis),
        ],
        eps_vacuum: EPS0,
        eps_insulator: EPS0,
        triple_point: None,
        electrode_loop: vec![],
        design: DesignMap::default(),
    })
}

/// Cylinder `ρ ∈ [0, radius]`, `z ∈ [0, gap]` split into two stacked patches, with the
/// bottom plate `GammaD1`, the top plate `GammaD0` and a natural outer wall.
pub fn parallel_plate(radius: f64, gap: f64) -> Result<MultiPatchModel, GeometryError> {
    if !(radius > 0.0 && gap > 0.0) {
        return Err(GeometryError::InvalidConfig("need positive radius and gap".into()));
    }
    let h = 0.5 * gap;
    let patch = |k: usize| Patch {
        name: format!("slab{k}"),
        surface: NurbsSurface::bilinear(
            [0.0, k as f64 * h],
            [radius, k as f64 * h],
            [0.0, (k + 1) as f64 * h],
            [radius, (k + 1) as f64 * h],
        ),
        material: Material::Vacuum,
    };
    let b = |patch, side, tag| BoundarySide { patch, side, tag };
    Ok(MultiPatchModel {
        patches: vec![patch(0), patch(1)],
        interfaces: vec![Interface {
            a: PatchSide {
                patch: 0,
                side: Side::EtaMax,
            },
            b: PatchSide {
                patch: 1,
                side: Side::EtaMin,
            },
            reversed: false,
            name: Some("midplane".into()),
        }],
        boundaries: vec![
            b(0, Side::EtaMin, BoundaryTag::GammaD1),
            b(1, Side::EtaMax, BoundaryTag::GammaD0),
            b(0, Side::XiMin, BoundaryTag::Axis),
            b(1, Side::XiMin, BoundaryTag::Axis),
            b(0, Side::XiMax, BoundaryTag::Natural),
            b(1, Side::XiMax, BoundaryTag::Natural),
        ],
        eps_vacuum: EPS0,
        eps_insulator: EPS0,
        triple_point: None,
        electrode_loop: vec![],
        design: DesignMap::default(),
    })
}
