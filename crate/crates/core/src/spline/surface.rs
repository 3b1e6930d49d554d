use serde::{Deserialize, Serialize};

use super::curve::NurbsCurve;
use super::knots::KnotVector;
use super::refine;
use super::SplineError;

/// Side of the parameter square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// ξ = 0
    XiMin,
    /// ξ = 1
    XiMax,
    /// η = 0
    EtaMin,
    /// η = 1
    EtaMax,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::XiMin, Side::XiMax, Side::EtaMin, Side::EtaMax];

    /// Parameter direction running along the side.
    pub fn tangent_direction(self) -> Direction {
        match self {
            Side::XiMin | Side::XiMax => Direction::Eta,
            Side::EtaMin | Side::EtaMax => Direction::Xi,
        }
    }

    /// Maps the running parameter `s` on this side to (ξ, η).
    pub fn param(self, s: f64) -> (f64, f64) {
        match self {
            Side::XiMin => (0.0, s),
            Side::XiMax => (1.0, s),
            Side::EtaMin => (s, 0.0),
            Side::EtaMax => (s, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Xi,
    Eta,
}

/// Point on a surface with its Jacobian `jac[r][c] = ∂x_r/∂u_c`,
/// rows (ρ, z), columns (ξ, η).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: [f64; 2],
    pub jac: [[f64; 2]; 2],
}

impl SurfacePoint {
    pub fn det(&self) -> f64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }
}

/// Tensor-product rational surface. Control point `(i, j)` is stored at `i + n_xi * j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSurface", into = "RawSurface")]
pub struct NurbsSurface {
    knots_xi: KnotVector,
    knots_eta: KnotVector,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSurface {
    knots_xi: KnotVector,
    knots_eta: KnotVector,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl TryFrom<RawSurface> for NurbsSurface {
    type Error = SplineError;
    fn try_from(r: RawSurface) -> Result<Self, SplineError> {
        NurbsSurface::new(r.knots_xi, r.knots_eta, r.points, r.weights)
    }
}

impl From<NurbsSurface> for RawSurface {
    fn from(s: NurbsSurface) -> Self {
        RawSurface {
            knots_xi: s.knots_xi,
            knots_eta: s.knots_eta,
            points: s.points,
            weights: s.weights,
        }
    }
}

impl NurbsSurface {
    pub fn new(
        knots_xi: KnotVector,
        knots_eta: KnotVector,
        points: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self, SplineError> {
        let n = knots_xi.num_basis() * knots_eta.num_basis();
        if points.len() != n || weights.len() != n {
            return Err(SplineError::InvalidControlNet(format!(
                "net needs {} x {} entries",
                knots_xi.num_basis(),
                knots_eta.num_basis()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(SplineError::InvalidControlNet("weights must be positive".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SplineError::InvalidControlNet("control points must be finite".into()));
        }
        Ok(NurbsSurface {
            knots_xi,
            knots_eta,
            points,
            weights,
        })
    }

    /// Bilinear patch from corners at (0,0), (1,0), (0,1), (1,1).
    pub fn bilinear(c00: [f64; 2], c10: [f64; 2], c01: [f64; 2], c11: [f64; 2]) -> Self {
        NurbsSurface {
            knots_xi: KnotVector::bezier(1),
            knots_eta: KnotVector::bezier(1),
            points: vec![c00, c10, c01, c11],
            weights: vec![1.0; 4],
        }
    }

    /// Surface interpolating a stack of ξ-curves as the η-control rows.
    /// The rows are made compatible first.
    pub fn from_rows(rows: &[NurbsCurve], knots_eta: KnotVector) -> Result<Self, SplineError> {
        if rows.len() != knots_eta.num_basis() {
            return Err(SplineError::InvalidControlNet(format!(
                "{} rows for {} η basis functions",
                rows.len(),
                knots_eta.num_basis()
            )));
        }
        let mut rows = rows.to_vec();
        for _ in 0..2 {
            for k in 1..rows.len() {
                let (a, b) = NurbsCurve::make_compatible(&rows[0], &rows[k])?;
                rows[0] = a;
                rows[k] = b;
            }
        }
        let knots_xi = rows[0].knots().clone();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for r in &rows {
            points.extend_from_slice(r.points());
            weights.extend_from_slice(r.weights());
        }
        NurbsSurface::new(knots_xi, knots_eta, points, weights)
    }

    /// Linear interpolation between two curves (η = 0 and η = 1).
    pub fn ruled(bottom: &NurbsCurve, top: &NurbsCurve) -> Result<Self, SplineError> {
        NurbsSurface::from_rows(&[bottom.clone(), top.clone()], KnotVector::bezier(1))
    }

    pub fn knots(&self, dir: Direction) -> &KnotVector {
        match dir {
            Direction::Xi => &self.knots_xi,
            Direction::Eta => &self.knots_eta,
        }
    }

    pub fn knots_xi(&self) -> &KnotVector {
        &self.knots_xi
    }

    pub fn knots_eta(&self) -> &KnotVector {
        &self.knots_eta
    }

    /// Net dimensions (n_xi, n_eta).
    pub fn shape(&self) -> (usize, usize) {
        (self.knots_xi.num_basis(), self.knots_eta.num_basis())
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        self.points[i + self.shape().0 * j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i + self.shape().0 * j]
    }

    pub fn set_point(&mut self, i: usize, j: usize, p: [f64; 2]) {
        let n = self.shape().0;
        self.points[i + n * j] = p;
    }

    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> NurbsSurface {
        let mut s = self.clone();
        for p in s.points.iter_mut() {
            *p = f(*p);
        }
        s
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Result<[f64; 2], SplineError> {
        Ok(self.eval_jacobian(xi, eta)?.point)
    }

    pub fn eval_jacobian(&self, xi: f64, eta: f64) -> Result<SurfacePoint, SplineError> {
        let su = self.knots_xi.find_span(xi)?;
        let sv = self.knots_eta.find_span(eta)?;
        Ok(self.eval_in_spans(su, sv, xi, eta))
    }

    /// Evaluation on the closure of the element given by knot spans `(su, sv)`.
    pub fn eval_in_spans(&self, su: usize, sv: usize, xi: f64, eta: f64) -> SurfacePoint {
        let bu = self.knots_xi.eval_basis_in_span(su, xi, 1.min(self.knots_xi.degree()));
        let bv = self.knots_eta.eval_basis_in_span(sv, eta, 1.min(self.knots_eta.degree()));
        let n1 = self.shape().0;
        let (fu, fv) = (bu.first(), bv.first());
        let mut a = [0.0; 2];
        let mut au = [0.0; 2];
        let mut av = [0.0; 2];
        let (mut w, mut wu, mut wv) = (0.0, 0.0, 0.0);
        for (lj, &nv) in bv.values().iter().enumerate() {
            let dnv = bv.derivs.get(1).map_or(0.0, |d| d[lj]);
            for (li, &nu) in bu.values().iter().enumerate() {
                let dnu = bu.derivs.get(1).map_or(0.0, |d| d[li]);
                let idx = fu + li + n1 * (fv + lj);
                let wt = self.weights[idx];
                let p = self.points[idx];
                let b = wt * nu * nv;
                let bu_ = wt * dnu * nv;
                let bv_ = wt * nu * dnv;
                w += b;
                wu += bu_;
                wv += bv_;
                for c in 0..2 {
                    a[c] += b * p[c];
                    au[c] += bu_ * p[c];
                    av[c] += bv_ * p[c];
                }
            }
        }
        let pt = [a[0] / w, a[1] / w];
        let mut jac = [[0.0; 2]; 2];
        for c in 0..2 {
            jac[c][0] = (au[c] - wu * pt[c]) / w;
            jac[c][1] = (av[c] - wv * pt[c]) / w;
        }
        SurfacePoint { point: pt, jac }
    }

    /// Boundary curve on `side`, parametrized in the increasing direction of the
    /// running parameter.
    pub fn boundary_curve(&self, side: Side) -> NurbsCurve {
        let (n1, n2) = self.shape();
        let (kv, idx): (&KnotVector, Vec<usize>) = match side {
            Side::XiMin => (&self.knots_eta, (0..n2).map(|j| n1 * j).collect()),
            Side::XiMax => (&self.knots_eta, (0..n2).map(|j| n1 - 1 + n1 * j).collect()),
            Side::EtaMin => (&self.knots_xi, (0..n1).collect()),
            Side::EtaMax => (&self.knots_xi, (0..n1).map(|i| i + n1 * (n2 - 1)).collect()),
        };
        let pts = idx.iter().map(|&k| self.points[k]).collect();
        let w = idx.iter().map(|&k| self.weights[k]).collect();
        NurbsCurve::new(kv.clone(), pts, w).expect("boundary of a valid surface")
    }

    /// Control-point indices `(i, j)` on `side`, in order of the running parameter.
    pub fn side_indices(&self, side: Side) -> Vec<(usize, usize)> {
        let (n1, n2) = self.shape();
        match side {
            Side::XiMin => (0..n2).map(|j| (0, j)).collect(),
            Side::XiMax => (0..n2).map(|j| (n1 - 1, j)).collect(),
            Side::EtaMin => (0..n1).map(|i| (i, 0)).collect(),
            Side::EtaMax => (0..n1).map(|i| (i, n2 - 1)).collect(),
        }
    }

    /// Homogeneous coefficients flattened per index along `dir`.
    fn flatten(&self, dir: Direction) -> Vec<Vec<f64>> {
        let (n1, n2) = self.shape();
        let h = |i: usize, j: usize| {
            let k = i + n1 * j;
            let w = self.weights[k];
            [w * self.points[k][0], w * self.points[k][1], w]
        };
        match dir {
            Direction::Xi => (0..n1).map(|i| (0..n2).flat_map(|j| h(i, j)).collect()).collect(),
            Direction::Eta => (0..n2).map(|j| (0..n1).flat_map(|i| h(i, j)).collect()).collect(),
        }
    }

    fn unflatten(&self, dir: Direction, kv: KnotVector, c: Vec<Vec<f64>>) -> NurbsSurface {
        let (knots_xi, knots_eta) = match dir {
            Direction::Xi => (kv, self.knots_eta.clone()),
            Direction::Eta => (self.knots_xi.clone(), kv),
        };
        let (n1, n2) = (knots_xi.num_basis(), knots_eta.num_basis());
        let mut points = vec![[0.0; 2]; n1 * n2];
        let mut weights = vec![0.0; n1 * n2];
        for j in 0..n2 {
            for i in 0..n1 {
                let (outer, inner) = match dir {
                    Direction::Xi => (i, j),
                    Direction::Eta => (j, i),
                };
                let v = &c[outer][3 * inner..3 * inner + 3];
                points[i + n1 * j] = [v[0] / v[2], v[1] / v[2]];
                weights[i + n1 * j] = v[2];
            }
        }
        NurbsSurface {
            knots_xi,
            knots_eta,
            points,
            weights,
        }
    }

    pub fn insert_knot(&self, dir: Direction, u: f64) -> Result<NurbsSurface, SplineError> {
        let kv = self.knots(dir);
        refine::check_insertion(kv, u)?;
        let (k2, c) = refine::insert_once(kv, &self.flatten(dir), u);
        Ok(self.unflatten(dir, k2, c))
    }

    pub fn elevate_degree(&self, dir: Direction, t: usize) -> Result<NurbsSurface, SplineError> {
        let (k2, c) = refine::elevate(self.knots(dir), &self.flatten(dir), t)?;
        Ok(self.unflatten(dir, k2, c))
    }

    /// Inserts the midpoint of every knot interval in direction `dir`.
    pub fn halve_intervals(&self, dir: Direction) -> NurbsSurface {
        let bps = self.knots(dir).breakpoints();
        let mut s = self.clone();
        for w in bps.windows(2) {
            let (k2, c) = refine::insert_once(s.knots(dir), &s.flatten(dir), 0.5 * (w[0] + w[1]));
            s = s.unflatten(dir, k2, c);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn warped() -> NurbsSurface {
        let kx = KnotVector::new(vec![0., 0., 0., 0.4, 1., 1., 1.], 2).unwrap();
        let ky = KnotVector::bezier(2);
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for j in 0..3 {
            for i in 0..4 {
                let (x, y) = (i as f64, j as f64);
                pts.push([x + 0.1 * y * y, y + 0.2 * (x * 1.3).sin()]);
                w.push(1.0 + 0.1 * ((i + 2 * j) % 3) as f64);
            }
        }
        NurbsSurface::new(kx, ky, pts, w).unwrap()
    }

    #[test]
    fn bilinear_map() {
        let s = NurbsSurface::bilinear([0., 0.], [2., 0.], [0., 3.], [2., 3.]);
        let sp = s.eval_jacobian(0.3, 0.7).unwrap();
        assert!((sp.point[0] - 0.6).abs() < 1e-15 && (sp.point[1] - 2.1).abs() < 1e-15);
        let want = [[2.0, 0.0], [0.0, 3.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((sp.jac[r][c] - want[r][c]).abs() < 1e-14);
            }
        }
        assert_eq!(s.eval(0.0, 0.0).unwrap(), [0.0, 0.0]);
        assert_eq!(s.eval(1.0, 1.0).unwrap(), [2.0, 3.0]);
    }

    #[test]
    fn corner_is_control_point() {
        let s = warped();
        assert_eq!(s.eval(0.0, 0.0).unwrap(), s.point(0, 0));
        let q = s.eval(1.0, 1.0).unwrap();
        let c = s.point(3, 2);
        assert!((q[0] - c[0]).abs() < 1e-14 && (q[1] - c[1]).abs() < 1e-14);
    }

    #[test]
    fn jacobian_matches_fd() {
        let s = warped();
        let h = 1e-6;
        for &(x, y) in &[(0.2, 0.3), (0.55, 0.8), (0.9, 0.1)] {
            let sp = s.eval_jacobian(x, y).unwrap();
            let px = s.eval(x + h, y).unwrap();
            let mx = s.eval(x - h, y).unwrap();
            let py = s.eval(x, y + h).unwrap();
            let my = s.eval(x, y - h).unwrap();
            for r in 0..2 {
                let fx = (px[r] - mx[r]) / (2.0 * h);
                let fy = (py[r] - my[r]) / (2.0 * h);
                assert!((sp.jac[r][0] - fx).abs() <= 1e-6 * fx.abs().max(1.0));
                assert!((sp.jac[r][1] - fy).abs() <= 1e-6 * fy.abs().max(1.0));
            }
        }
    }

    #[test]
    fn boundary_curves_match_surface() {
        let s = warped();
        for side in Side::ALL {
            let c = s.boundary_curve(side);
            for k in 0..11 {
                let t = k as f64 / 10.0;
                let (x, y) = side.param(t);
                let a = s.eval(x, y).unwrap();
                let b = c.eval(t).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn refinement_preserves_map() {
        let s = warped();
        let variants = [
            s.insert_knot(Direction::Xi, 0.7).unwrap(),
            s.insert_knot(Direction::Eta, 0.5).unwrap(),
            s.elevate_degree(Direction::Xi, 2).unwrap(),
            s.elevate_degree(Direction::Eta, 1).unwrap(),
            s.halve_intervals(Direction::Xi),
        ];
        for v in &variants {
            for a in 0..9 {
                for b in 0..9 {
                    let (x, y) = (a as f64 / 8.0, b as f64 / 8.0);
                    let p = s.eval(x, y).unwrap();
                    let q = v.eval(x, y).unwrap();
                    assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ruled_between_curves() {
        let bottom = NurbsCurve::polynomial(KnotVector::bezier(2), vec![[0., 0.], [1., 0.5], [2., 0.]]).unwrap();
        let top = NurbsCurve::line([0., 2.], [2., 2.]);
        let s = NurbsSurface::ruled(&bottom, &top).unwrap();
        let p = s.eval(0.5, 0.5).unwrap();
        let b = bottom.eval(0.5).unwrap();
        assert!((p[1] - 0.5 * (b[1] + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn serde_round_trip() {
        let s = warped();
        let j = serde_json::to_string(&s).unwrap();
        let t: NurbsSurface = serde_json::from_str(&j).unwrap();
        assert_eq!(s, t);
    }
}
