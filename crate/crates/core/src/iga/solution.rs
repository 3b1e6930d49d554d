use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assemble::Voltages;
use super::space::SplineSpace;
use super::IgaError;
use crate::geometry::{BoundaryTag, Material, MultiPatchModel, RegionOfInterest, SamplePoint};
use crate::quadrature::gauss_legendre;
use crate::spline::{Direction, Side, SplineError};

/// Discrete potential over a spline space, with the model it lives on.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    model: Arc<MultiPatchModel>,
    space: Arc<SplineSpace>,
    coeffs: Vec<f64>,
    voltages: Voltages,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMax {
    /// V/m
    pub value: f64,
    pub point: [f64; 2],
    pub patch: usize,
    pub xi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySelector {
    Tag(BoundaryTag),
    Interface(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub phi: f64,
    pub e_mag: f64,
    pub point: [f64; 2],
}

fn check_param(u: f64) -> Result<(), IgaError> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(SplineError::ParameterOutOfRange(u).into())
    }
}

/// Physical gradient from parametric derivatives; `jac[r][c] = ∂x_r/∂u_c`.
fn push_forward(jac: [[f64; 2]; 2], det: f64, gu: f64, gv: f64) -> [f64; 2] {
    [(jac[1][1] * gu - jac[1][0] * gv) / det, (-jac[0][1] * gu + jac[0][0] * gv) / det]
}

impl FieldSolution {
    pub fn new(model: Arc<MultiPatchModel>, space: Arc<SplineSpace>, coeffs: Vec<f64>, voltages: Voltages) -> Self {
        FieldSolution {
            model,
            space,
            coeffs,
            voltages,
        }
    }

    pub fn model(&self) -> &MultiPatchModel {
        &self.model
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn voltages(&self) -> Voltages {
        self.voltages
    }

    /// Potential and its parametric gradient; `left` picks one-sided limits from below.
    fn local(&self, patch: usize, xi: f64, eta: f64, left: [bool; 2]) -> Result<(f64, f64, f64), IgaError> {
        check_param(xi)?;
        check_param(eta)?;
        let ps = &self.space.patches[patch];
        let (kx, ky) = (&ps.xi.knots, &ps.eta.knots);
        let sx = if left[0] { kx.left_span(xi)? } else { kx.find_span(xi)? };
        let sy = if left[1] { ky.left_span(eta)? } else { ky.find_span(eta)? };
        let bx = kx.eval_basis_in_span(sx, xi, 1);
        let by = ky.eval_basis_in_span(sy, eta, 1);
        let (fx, fy) = (sx - kx.degree(), sy - ky.degree());
        let n1 = ps.shape().0;
        let (mut phi, mut gu, mut gv) = (0.0, 0.0, 0.0);
        for (ly, (ny, dy)) in by.derivs[0].iter().zip(&by.derivs[1]).enumerate() {
            for (lx, (nx, dx)) in bx.derivs[0].iter().zip(&bx.derivs[1]).enumerate() {
                let c = self.coeffs[ps.global[fx + lx + n1 * (fy + ly)]];
                phi += c * nx * ny;
                gu += c * dx * ny;
                gv += c * nx * dy;
            }
        }
        Ok((phi, gu, gv))
    }

    pub fn eval_potential(&self, patch: usize, xi: f64, eta: f64) -> Result<f64, IgaError> {
        Ok(self.local(patch, xi, eta, [false; 2])?.0)
    }

    /// `(E_ρ, E_z)` in V/m.
    pub fn eval_field(&self, patch: usize, xi: f64, eta: f64) -> Result<[f64; 2], IgaError> {
        self.eval_field_sided(patch, xi, eta, [false; 2])
    }

    /// Field limit approached from below in the directions flagged by `left`.
    pub fn eval_field_sided(&self, patch: usize, xi: f64, eta: f64, left: [bool; 2]) -> Result<[f64; 2], IgaError> {
        let (_, gu, gv) = self.local(patch, xi, eta, left)?;
        let surf = &self.model.patches[patch].surface;
        let (gx, gy) = (surf.knots_xi(), surf.knots_eta());
        let su = if left[0] { gx.left_span(xi)? } else { gx.find_span(xi)? };
        let sv = if left[1] { gy.left_span(eta)? } else { gy.find_span(eta)? };
        let sp = surf.eval_in_spans(su, sv, xi, eta);
        let det = sp.det();
        if !(det > 0.0) {
            return Err(IgaError::SingularJacobian { patch, xi, eta, det });
        }
        let g = push_forward(sp.jac, det, gu, gv);
        Ok([-g[0], -g[1]])
    }

    /// Jump `E(u⁺) − E(u⁻)` across the element boundary at parameter `knot` in
    /// direction `dir`, with the other parameter fixed at `t`.
    pub fn field_jump(&self, patch: usize, dir: Direction, knot: f64, t: f64) -> Result<[f64; 2], IgaError> {
        let (xi, eta, left) = match dir {
            Direction::Xi => (knot, t, [true, false]),
            Direction::Eta => (t, knot, [false, true]),
        };
        let a = self.eval_field_sided(patch, xi, eta, [false; 2])?;
        let b = self.eval_field_sided(patch, xi, eta, left)?;
        Ok([a[0] - b[0], a[1] - b[1]])
    }

    /// Field at a physical point, searching patches of `material` (any when `None`).
    pub fn field_at_point(&self, x: [f64; 2], material: Option<Material>) -> Option<(usize, [f64; 2])> {
        let (patch, xi, eta) = self.model.locate(x, material)?;
        self.eval_field(patch, xi, eta).ok().map(|e| (patch, e))
    }

    /// `(ξ, η, point, φ, E)` at the Gauss points of one element.
    pub fn element_samples(&self, patch: usize, ex: usize, ey: usize) -> Result<Vec<(f64, f64, [f64; 2], f64, [f64; 2])>, IgaError> {
        let ps = &self.space.patches[patch];
        let surf = &self.model.patches[patch].surface;
        let p = self.space.disc.degree;
        let dofs = self.space.element_functions(patch, ex, ey);
        let (tx, ty) = (&ps.xi, &ps.eta);
        let mut out = Vec::with_capacity(tx.points[ex].len() * ty.points[ey].len());
        for qy in 0..ty.points[ey].len() {
            for qx in 0..tx.points[ex].len() {
                let (u, v) = (tx.points[ex][qx], ty.points[ey][qy]);
                let (nx, dx) = (&tx.values[ex][qx], &tx.derivs[ex][qx]);
                let (ny, dy) = (&ty.values[ey][qy], &ty.derivs[ey][qy]);
                let (mut phi, mut gu, mut gv) = (0.0, 0.0, 0.0);
                for ly in 0..=p {
                    for lx in 0..=p {
                        let c = self.coeffs[dofs[lx + (p + 1) * ly]];
                        phi += c * nx[lx] * ny[ly];
                        gu += c * dx[lx] * ny[ly];
                        gv += c * nx[lx] * dy[ly];
                    }
                }
                let sp = surf.eval_jacobian(u, v)?;
                let det = sp.det();
                if !(det > 0.0) {
                    return Err(IgaError::SingularJacobian { patch, xi: u, eta: v, det });
                }
                let g = push_forward(sp.jac, det, gu, gv);
                out.push((u, v, sp.point, phi, [-g[0], -g[1]]));
            }
        }
        Ok(out)
    }

    fn elements_in(&self, region: &RegionOfInterest) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (k, ps) in self.space.patches.iter().enumerate() {
            for ey in 0..ps.eta.n_elem {
                for ex in 0..ps.xi.n_elem {
                    if region.contains_element(k, ps.xi.element_bounds(ex), ps.eta.element_bounds(ey)) {
                        out.push((k, ex, ey));
                    }
                }
            }
        }
        out
    }

    /// Largest ‖E‖ over the quadrature points of the region's elements.
    pub fn max_field(&self, region: &RegionOfInterest) -> Result<FieldMax, IgaError> {
        let elements = self.elements_in(region);
        if elements.is_empty() {
            return Err(IgaError::EmptyRegion);
        }
        let per: Vec<Result<FieldMax, IgaError>> = elements
            .par_iter()
            .map(|&(k, ex, ey)| {
                let mut best = FieldMax {
                    value: -1.0,
                    point: [0.0; 2],
                    patch: k,
                    xi: 0.0,
                    eta: 0.0,
                };
                for (xi, eta, point, _, e) in self.element_samples(k, ex, ey)? {
                    let m = e[0].hypot(e[1]);
                    if m > best.value {
                        best = FieldMax {
                            value: m,
                            point,
                            patch: k,
                            xi,
                            eta,
                        };
                    }
                }
                Ok(best)
            })
            .collect();
        let mut best: Option<FieldMax> = None;
        for r in per {
            let r = r?;
            if best.is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
        Ok(best.expect("non-empty region"))
    }

    /// Sum of ‖E‖ over the sample points.
    pub fn triple_point_term(&self, samples: &[SamplePoint]) -> Result<f64, IgaError> {
        if samples.is_empty() {
            return Err(IgaError::EmptyRegion);
        }
        let mut s = 0.0;
        for p in samples {
            let e = self.eval_field(p.patch, p.xi, p.eta)?;
            s += e[0].hypot(e[1]);
        }
        Ok(s)
    }

    /// Smallest and largest potential over all quadrature points.
    pub fn quadrature_potential_range(&self) -> Result<(f64, f64), IgaError> {
        let region = RegionOfInterest::whole_model(&self.model);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (k, ex, ey) in self.elements_in(&region) {
            for (.., phi, _) in self.element_samples(k, ex, ey)? {
                lo = lo.min(phi);
                hi = hi.max(phi);
            }
        }
        Ok((lo, hi))
    }

    /// Absolute and relative L² error of the potential against `exact`, in the
    /// volume measure of the axisymmetric domain.
    pub fn l2_error(&self, exact: impl Fn([f64; 2]) -> f64) -> Result<(f64, f64), IgaError> {
        let nq = self.space.disc.degree + 3;
        let (gx, gw) = gauss_legendre(nq);
        let (mut err, mut refn) = (0.0, 0.0);
        for (k, ps) in self.space.patches.iter().enumerate() {
            let surf = &self.model.patches[k].surface;
            for ey in 0..ps.eta.n_elem {
                let [ya, yb] = ps.eta.element_bounds(ey);
                for ex in 0..ps.xi.n_elem {
                    let [xa, xb] = ps.xi.element_bounds(ex);
                    for (qy, wy) in gx.iter().zip(&gw) {
                        for (qx, wx) in gx.iter().zip(&gw) {
                            let (u, v) = (xa + (xb - xa) * qx, ya + (yb - ya) * qy);
                            let sp = surf.eval_jacobian(u, v)?;
                            let w = wx * wy * (xb - xa) * (yb - ya) * sp.det() * sp.point[0];
                            let phi = self.eval_potential(k, u, v)?;
                            let ex_v = exact(sp.point);
                            err += w * (phi - ex_v).powi(2);
                            refn += w * ex_v * ex_v;
                        }
                    }
                }
            }
        }
        let abs = err.sqrt();
        Ok((abs, if refn > 0.0 { abs / refn.sqrt() } else { abs }))
    }

    fn selected_sides(&self, sel: &BoundarySelector) -> Result<Vec<(usize, Side)>, IgaError> {
        let m = &self.model;
        match sel {
            BoundarySelector::Tag(tag) => {
                let v: Vec<(usize, Side)> = m.boundaries.iter().filter(|b| b.tag == *tag).map(|b| (b.patch, b.side)).collect();
                if v.is_empty() {
                    return Err(IgaError::UnknownBoundary(format!("no side tagged {tag:?}")));
                }
                Ok(v)
            }
            BoundarySelector::Interface(name) => {
                let itf = m
                    .interface_by_name(name)
                    .ok_or_else(|| IgaError::UnknownBoundary(format!("no interface named '{name}'")))?;
                let side = if m.patches[itf.a.patch].material != Material::Vacuum
                    && m.patches[itf.b.patch].material == Material::Vacuum
                {
                    itf.b
                } else {
                    itf.a
                };
                Ok(vec![(side.patch, side.side)])
            }
        }
    }

    /// Potential and field magnitude sampled along a boundary, ordered by arclength.
    /// Sides are chained end to end; disconnected pieces continue the arclength count.
    pub fn boundary_profile(&self, sel: &BoundarySelector, n_samples: usize) -> Result<Vec<ProfileSample>, IgaError> {
        let sides = self.selected_sides(sel)?;
        let chain = chain_sides(&self.model, &sides)?;
        let n_samples = n_samples.max(2);
        let lengths: Vec<f64> = chain
            .iter()
            .map(|&(k, side, _)| side_arclength(&self.model, k, side, 0.0, 1.0))
            .collect::<Result<_, _>>()?;
        let total: f64 = lengths.iter().sum();
        let mut counts: Vec<usize> = lengths
            .iter()
            .map(|l| ((n_samples as f64 * l / total).round() as usize).max(2))
            .collect();
        let assigned: usize = counts.iter().sum();
        if let Some(last) = counts.last_mut() {
            *last = (*last + n_samples).saturating_sub(assigned).max(2);
        }
        let mut out = Vec::new();
        let mut offset = 0.0;
        for ((&(k, side, rev), &len), &cnt) in chain.iter().zip(&lengths).zip(&counts) {
            let mut s_acc = 0.0;
            let mut prev = if rev { 1.0 } else { 0.0 };
            for q in 0..cnt {
                let t = q as f64 / (cnt - 1) as f64;
                let u = if rev { 1.0 - t } else { t };
                s_acc += side_arclength(&self.model, k, side, prev, u)?;
                prev = u;
                let (xi, eta) = side.param(u);
                let phi = self.eval_potential(k, xi, eta)?;
                let e = self.eval_field(k, xi, eta)?;
                let point = self.model.patches[k].surface.eval(xi, eta)?;
                out.push(ProfileSample {
                    s: offset + s_acc,
                    phi,
                    e_mag: e[0].hypot(e[1]),
                    point,
                });
            }
            offset += len;
        }
        Ok(out)
    }
}

/// Length of the boundary curve of a side between parameters `a` and `b`.
fn side_arclength(model: &MultiPatchModel, patch: usize, side: Side, a: f64, b: f64) -> Result<f64, IgaError> {
    if a == b {
        return Ok(0.0);
    }
    let curve = model.patches[patch].surface.boundary_curve(side);
    let (gx, gw) = gauss_legendre(16);
    let sub = 8;
    let mut l = 0.0;
    for k in 0..sub {
        let (lo, hi) = (a + (b - a) * k as f64 / sub as f64, a + (b - a) * (k + 1) as f64 / sub as f64);
        for (x, w) in gx.iter().zip(&gw) {
            let d = curve.deriv(lo + (hi - lo) * x)?;
            l += w * (hi - lo) * d[0].hypot(d[1]);
        }
    }
    Ok(l.abs())
}

/// Orders sides into end-to-end chains; each entry is `(patch, side, reversed)`.
fn chain_sides(model: &MultiPatchModel, sides: &[(usize, Side)]) -> Result<Vec<(usize, Side, bool)>, IgaError> {
    let tol = 1e-9 * model.length_scale();
    let ends: Vec<([f64; 2], [f64; 2])> = sides
        .iter()
        .map(|&(k, s)| {
            let c = model.patches[k].surface.boundary_curve(s);
            (c.start(), c.end())
        })
        .collect();
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]) <= tol;
    let mut used = vec![false; sides.len()];
    let mut out = Vec::new();
    while used.iter().any(|u| !u) {
        // an open end starts a chain; a closed loop starts anywhere
        let touches = |p: [f64; 2], skip: usize, used: &[bool]| {
            (0..sides.len()).any(|m| m != skip && !used[m] && (close(p, ends[m].0) || close(p, ends[m].1)))
        };
        let mut start = None;
        for k in (0..sides.len()).filter(|&k| !used[k]) {
            if !touches(ends[k].0, k, &used) {
                start = Some((k, false));
                break;
            }
            if !touches(ends[k].1, k, &used) {
                start = Some((k, true));
                break;
            }
        }
        let (mut k, mut rev) = start.unwrap_or_else(|| ((0..sides.len()).find(|&k| !used[k]).unwrap(), false));
        loop {
            used[k] = true;
            out.push((sides[k].0, sides[k].1, rev));
            let tail = if rev { ends[k].0 } else { ends[k].1 };
            let next = (0..sides.len()).filter(|&m| !used[m]).find_map(|m| {
                if close(tail, ends[m].0) {
                    Some((m, false))
                } else if close(tail, ends[m].1) {
                    Some((m, true))
                } else {
                    None
                }
            });
            match next {
                Some((m, r)) => {
                    k = m;
                    rev = r;
                }
                None => break,
            }
        }
    }
    Ok(out)
}
