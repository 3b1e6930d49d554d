use serde::{Deserialize, Serialize};

use super::IgaError;
use crate::geometry::{BoundaryTag, MultiPatchModel};
use crate::quadrature::gauss_legendre;
use crate::spline::{KnotVector, Side};

/// Degree, continuity and elements per direction of the discrete space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub degree: usize,
    pub continuity: usize,
    pub n_sub: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            degree: 3,
            continuity: 2,
            n_sub: 16,
        }
    }
}

/// Basis values and first derivatives of one direction at the Gauss points of
/// every element.
#[derive(Debug, Clone)]
pub struct DirectionTable {
    pub knots: KnotVector,
    pub n_elem: usize,
    /// quadrature abscissae per element, in [0, 1] parameter units
    pub points: Vec<Vec<f64>>,
    /// weights scaled to the element length
    pub weights: Vec<Vec<f64>>,
    /// `values[e][q][l]` for local function `l`
    pub values: Vec<Vec<Vec<f64>>>,
    pub derivs: Vec<Vec<Vec<f64>>>,
    /// first global-in-patch function index of each element
    pub first: Vec<usize>,
    /// knot span of each element
    pub span: Vec<usize>,
}

impl DirectionTable {
    fn new(knots: KnotVector, n_elem: usize, nq: usize) -> Self {
        let (gx, gw) = gauss_legendre(nq);
        let bps = knots.breakpoints();
        let mut t = DirectionTable {
            knots,
            n_elem,
            points: Vec::new(),
            weights: Vec::new(),
            values: Vec::new(),
            derivs: Vec::new(),
            first: Vec::new(),
            span: Vec::new(),
        };
        for e in 0..n_elem {
            let (a, b) = (bps[e], bps[e + 1]);
            let span = t.knots.find_span(a).expect("breakpoint in range");
            let mut pts = Vec::new();
            let mut wts = Vec::new();
            let mut vals = Vec::new();
            let mut ders = Vec::new();
            for (x, w) in gx.iter().zip(&gw) {
                let u = a + (b - a) * x;
                let bs = t.knots.eval_basis_in_span(span, u, 1.min(t.knots.degree()));
                pts.push(u);
                wts.push(w * (b - a));
                vals.push(bs.derivs[0].clone());
                ders.push(bs.derivs.get(1).cloned().unwrap_or_else(|| vec![0.0; bs.derivs[0].len()]));
            }
            t.first.push(span - t.knots.degree());
            t.span.push(span);
            t.points.push(pts);
            t.weights.push(wts);
            t.values.push(vals);
            t.derivs.push(ders);
        }
        t
    }

    /// Element interval `[a, b]` in parameter units.
    pub fn element_bounds(&self, e: usize) -> [f64; 2] {
        [e as f64 / self.n_elem as f64, (e + 1) as f64 / self.n_elem as f64]
    }

    /// Element containing `u` (right end belongs to the last element).
    pub fn element_of(&self, u: f64) -> usize {
        ((u * self.n_elem as f64).floor() as usize).min(self.n_elem - 1)
    }
}

#[derive(Debug, Clone)]
pub struct PatchSpace {
    pub xi: DirectionTable,
    pub eta: DirectionTable,
    /// global index of local function `i + n_xi * j`
    pub global: Vec<usize>,
}

impl PatchSpace {
    pub fn shape(&self) -> (usize, usize) {
        (self.xi.knots.num_basis(), self.eta.knots.num_basis())
    }

    pub fn side_functions(&self, side: Side) -> Vec<usize> {
        let (n1, n2) = self.shape();
        match side {
            Side::XiMin => (0..n2).map(|j| n1 * j).collect(),
            Side::XiMax => (0..n2).map(|j| n1 - 1 + n1 * j).collect(),
            Side::EtaMin => (0..n1).collect(),
            Side::EtaMax => (0..n1).map(|i| i + n1 * (n2 - 1)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplineSpace {
    pub disc: Discretization,
    pub patches: Vec<PatchSpace>,
    pub n_global: usize,
    /// Dirichlet tag of each global function, `None` for free ones.
    pub dirichlet: Vec<Option<BoundaryTag>>,
    /// index among the free functions, `None` for constrained ones
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl SplineSpace {
    /// Uniform tensor-product space of the given degree and continuity with `n_sub`
    /// elements per direction on every patch; interface functions are shared.
    pub fn build(model: &MultiPatchModel, disc: Discretization) -> Result<Self, IgaError> {
        let p = disc.degree;
        if p == 0 || disc.continuity >= p || disc.n_sub == 0 {
            return Err(IgaError::InvalidDiscretization(format!(
                "need degree ≥ 1, continuity < degree, n_sub ≥ 1 (got {disc:?})"
            )));
        }
        let diag = model.validate();
        if !diag.conformity_violations.is_empty() || !diag.untagged_sides.is_empty() {
            return Err(IgaError::NonConforming(diag.summary()));
        }
        let kv = KnotVector::uniform(p, disc.n_sub, disc.continuity)?;
        let nq = p + 1;
        let mut patches = Vec::new();
        let mut offset = 0;
        for _ in &model.patches {
            let xi = DirectionTable::new(kv.clone(), disc.n_sub, nq);
            let eta = DirectionTable::new(kv.clone(), disc.n_sub, nq);
            let n = xi.knots.num_basis() * eta.knots.num_basis();
            patches.push(PatchSpace {
                xi,
                eta,
                global: (offset..offset + n).collect(),
            });
            offset += n;
        }
        let mut parent: Vec<usize> = (0..offset).collect();
        for itf in &model.interfaces {
            let a: Vec<usize> = patches[itf.a.patch]
                .side_functions(itf.a.side)
                .iter()
                .map(|&l| patches[itf.a.patch].global[l])
                .collect();
            let mut b: Vec<usize> = patches[itf.b.patch]
                .side_functions(itf.b.side)
                .iter()
                .map(|&l| patches[itf.b.patch].global[l])
                .collect();
            if itf.reversed {
                b.reverse();
            }
            if a.len() != b.len() {
                return Err(IgaError::NonConforming("interface sides have different dimensions".into()));
            }
            for (x, y) in a.into_iter().zip(b) {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                if rx != ry {
                    parent[rx.max(ry)] = rx.min(ry);
                }
            }
        }
        // compact numbering in order of first appearance
        let mut compact = vec![usize::MAX; offset];
        let mut n_global = 0;
        for k in 0..offset {
            let r = find(&mut parent, k);
            if compact[r] == usize::MAX {
                compact[r] = n_global;
                n_global += 1;
            }
        }
        for ps in patches.iter_mut() {
            for g in ps.global.iter_mut() {
                *g = compact[find(&mut parent, *g)];
            }
        }
        let mut dirichlet: Vec<Option<BoundaryTag>> = vec![None; n_global];
        for b in &model.boundaries {
            if !b.tag.is_dirichlet() {
                continue;
            }
            let ps = &patches[b.patch];
            for l in ps.side_functions(b.side) {
                let g = ps.global[l];
                match dirichlet[g] {
                    Some(t) if t.priority() >= b.tag.priority() => {}
                    _ => dirichlet[g] = Some(b.tag),
                }
            }
        }
        let mut free_index = vec![None; n_global];
        let mut n_free = 0;
        for g in 0..n_global {
            if dirichlet[g].is_none() {
                free_index[g] = Some(n_free);
                n_free += 1;
            }
        }
        Ok(SplineSpace {
            disc,
            patches,
            n_global,
            dirichlet,
            free_index,
            n_free,
        })
    }

    /// Global indices of the functions supported on element `(ex, ey)` of a patch,
    /// ordered `lx + (p + 1) * ly`.
    pub fn element_functions(&self, patch: usize, ex: usize, ey: usize) -> Vec<usize> {
        let ps = &self.patches[patch];
        let p = self.disc.degree;
        let n1 = ps.shape().0;
        let (fx, fy) = (ps.xi.first[ex], ps.eta.first[ey]);
        let mut out = Vec::with_capacity((p + 1) * (p + 1));
        for ly in 0..=p {
            for lx in 0..=p {
                out.push(ps.global[fx + lx + n1 * (fy + ly)]);
            }
        }
        out
    }
}
