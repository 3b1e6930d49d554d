use serde::{Deserialize, Serialize};

use super::knots::KnotVector;
use super::refine;
use super::SplineError;

/// Rational B-spline curve with control points in the (ρ, z) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct NurbsCurve {
    knots: KnotVector,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    knots: KnotVector,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl TryFrom<RawCurve> for NurbsCurve {
    type Error = SplineError;
    fn try_from(r: RawCurve) -> Result<Self, SplineError> {
        NurbsCurve::new(r.knots, r.points, r.weights)
    }
}

impl From<NurbsCurve> for RawCurve {
    fn from(c: NurbsCurve) -> Self {
        RawCurve {
            knots: c.knots,
            points: c.points,
            weights: c.weights,
        }
    }
}

impl NurbsCurve {
    pub fn new(knots: KnotVector, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self, SplineError> {
        if points.len() != knots.num_basis() {
            return Err(SplineError::InvalidControlNet(format!(
                "{} control points for {} basis functions",
                points.len(),
                knots.num_basis()
            )));
        }
        if weights.len() != points.len() {
            return Err(SplineError::InvalidControlNet("one weight per control point required".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(SplineError::InvalidControlNet("weights must be positive".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SplineError::InvalidControlNet("control points must be finite".into()));
        }
        Ok(NurbsCurve { knots, points, weights })
    }

    /// Polynomial curve (unit weights).
    pub fn polynomial(knots: KnotVector, points: Vec<[f64; 2]>) -> Result<Self, SplineError> {
        let w = vec![1.0; points.len()];
        NurbsCurve::new(knots, points, w)
    }

    /// Straight segment of degree 1.
    pub fn line(a: [f64; 2], b: [f64; 2]) -> Self {
        NurbsCurve {
            knots: KnotVector::bezier(1),
            points: vec![a, b],
            weights: vec![1.0, 1.0],
        }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_polynomial(&self) -> bool {
        self.weights.iter().all(|&w| w == self.weights[0])
    }

    pub fn start(&self) -> [f64; 2] {
        self.points[0]
    }

    pub fn end(&self) -> [f64; 2] {
        *self.points.last().unwrap()
    }

    pub fn eval(&self, xi: f64) -> Result<[f64; 2], SplineError> {
        Ok(self.eval_with_deriv(xi)?.0)
    }

    pub fn deriv(&self, xi: f64) -> Result<[f64; 2], SplineError> {
        Ok(self.eval_with_deriv(xi)?.1)
    }

    /// Point and first derivative at `xi`.
    pub fn eval_with_deriv(&self, xi: f64) -> Result<([f64; 2], [f64; 2]), SplineError> {
        let span = self.knots.find_span(xi)?;
        Ok(self.eval_in_span(span, xi))
    }

    /// Evaluates the polynomial pieces of knot span `span`, which allows one-sided
    /// limits at knots.
    pub fn eval_in_span(&self, span: usize, xi: f64) -> ([f64; 2], [f64; 2]) {
        let nd = 1.min(self.degree());
        let b = self.knots.eval_basis_in_span(span, xi, nd);
        let first = b.first();
        let (mut a, mut da) = ([0.0; 2], [0.0; 2]);
        let (mut w, mut dw) = (0.0, 0.0);
        for (l, &n) in b.values().iter().enumerate() {
            let i = first + l;
            let wi = self.weights[i];
            let dn = if nd > 0 { b.derivs[1][l] } else { 0.0 };
            w += wi * n;
            dw += wi * dn;
            for c in 0..2 {
                a[c] += wi * n * self.points[i][c];
                da[c] += wi * dn * self.points[i][c];
            }
        }
        let pt = [a[0] / w, a[1] / w];
        let d = [(da[0] - dw * pt[0]) / w, (da[1] - dw * pt[1]) / w];
        (pt, d)
    }

    fn homogeneous(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| vec![w * p[0], w * p[1], w])
            .collect()
    }

    fn from_homogeneous(knots: KnotVector, h: Vec<Vec<f64>>) -> Self {
        let points = h.iter().map(|v| [v[0] / v[2], v[1] / v[2]]).collect();
        let weights = h.iter().map(|v| v[2]).collect();
        NurbsCurve { knots, points, weights }
    }

    /// Inserts `xibar` once; the mapped curve is unchanged.
    pub fn insert_knot(&self, xibar: f64) -> Result<NurbsCurve, SplineError> {
        refine::check_insertion(&self.knots, xibar)?;
        let (kv, h) = refine::insert_once(&self.knots, &self.homogeneous(), xibar);
        Ok(NurbsCurve::from_homogeneous(kv, h))
    }

    /// Raises the degree by `t`, each knot multiplicity by `t`; the mapped curve is unchanged.
    pub fn elevate_degree(&self, t: usize) -> Result<NurbsCurve, SplineError> {
        let (kv, h) = refine::elevate(&self.knots, &self.homogeneous(), t)?;
        Ok(NurbsCurve::from_homogeneous(kv, h))
    }

    /// Inserts the midpoint of every non-empty knot interval.
    pub fn halve_intervals(&self) -> NurbsCurve {
        let bps = self.knots.breakpoints();
        let mut c = self.clone();
        for w in bps.windows(2) {
            let (kv, h) = refine::insert_once(&c.knots, &c.homogeneous(), 0.5 * (w[0] + w[1]));
            c = NurbsCurve::from_homogeneous(kv, h);
        }
        c
    }

    /// Same curve traversed from end to start.
    pub fn reversed(&self) -> NurbsCurve {
        let knots: Vec<f64> = self.knots.knots().iter().rev().map(|k| 1.0 - k).collect();
        NurbsCurve {
            knots: KnotVector::from_parts_unchecked(knots, self.degree()),
            points: self.points.iter().rev().copied().collect(),
            weights: self.weights.iter().rev().copied().collect(),
        }
    }

    /// Applies `f` to every control point.
    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> NurbsCurve {
        NurbsCurve {
            knots: self.knots.clone(),
            points: self.points.iter().map(|&p| f(p)).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn with_points(&self, points: Vec<[f64; 2]>) -> Result<NurbsCurve, SplineError> {
        NurbsCurve::new(self.knots.clone(), points, self.weights.clone())
    }

    /// Brings two curves onto a common degree and knot vector.
    pub fn make_compatible(a: &NurbsCurve, b: &NurbsCurve) -> Result<(NurbsCurve, NurbsCurve), SplineError> {
        let mut a = a.clone();
        let mut b = b.clone();
        if a.degree() < b.degree() {
            a = a.elevate_degree(b.degree() - a.degree())?;
        } else if b.degree() < a.degree() {
            b = b.elevate_degree(a.degree() - b.degree())?;
        }
        for u in a.knots.unique_interior() {
            for _ in b.knots.multiplicity(u)..a.knots.multiplicity(u) {
                b = b.insert_knot(u)?;
            }
        }
        for u in b.knots.unique_interior() {
            for _ in a.knots.multiplicity(u)..b.knots.multiplicity(u) {
                a = a.insert_knot(u)?;
            }
        }
        Ok((a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig4_curve() -> NurbsCurve {
        let kv = KnotVector::new(vec![0., 0., 0., 0.3, 0.5, 1., 1., 1.], 2).unwrap();
        NurbsCurve::polynomial(kv, vec![[0., 1.], [1., -1.], [3., 2.], [5., 4.], [7., 1.]]).unwrap()
    }

    /// Brute-force evaluation from the recursive definition over all basis functions.
    fn brute_eval(c: &NurbsCurve, xi: f64) -> [f64; 2] {
        fn n(k: &[f64], i: usize, p: usize, x: f64) -> f64 {
            if p == 0 {
                let last = *k.last().unwrap();
                return if (k[i] <= x && x < k[i + 1]) || (x == last && k[i] < k[i + 1] && k[i + 1] == last) {
                    1.0
                } else {
                    0.0
                };
            }
            let mut v = 0.0;
            if k[i + p] > k[i] {
                v += (x - k[i]) / (k[i + p] - k[i]) * n(k, i, p - 1, x);
            }
            if k[i + p + 1] > k[i + 1] {
                v += (k[i + p + 1] - x) / (k[i + p + 1] - k[i + 1]) * n(k, i + 1, p - 1, x);
            }
            v
        }
        let k = c.knots().knots();
        let p = c.degree();
        let (mut num, mut den) = ([0.0; 2], 0.0);
        for i in 0..c.points().len() {
            let b = n(k, i, p, xi) * c.weights()[i];
            den += b;
            num[0] += b * c.points()[i][0];
            num[1] += b * c.points()[i][1];
        }
        [num[0] / den, num[1] / den]
    }

    fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
        (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
    }

    #[test]
    fn endpoints_and_interior() {
        let c = fig4_curve();
        assert_eq!(c.eval(0.0).unwrap(), [0.0, 1.0]);
        assert_eq!(c.eval(1.0).unwrap(), [7.0, 1.0]);
        let v = c.eval(0.4).unwrap();
        assert!(close(v, brute_eval(&c, 0.4), 1e-14));
        assert!(c.eval(1.01).is_err());
    }

    #[test]
    fn derivative_checks() {
        let l = NurbsCurve::polynomial(KnotVector::bezier(1), vec![[0., 0.], [1., 1.]]).unwrap();
        for xi in [0.0, 0.3, 1.0] {
            assert!(close(l.deriv(xi).unwrap(), [1.0, 1.0], 1e-15));
        }
        let k = NurbsCurve::polynomial(KnotVector::bezier(3), vec![[2., 3.]; 4]).unwrap();
        assert!(close(k.deriv(0.7).unwrap(), [0.0, 0.0], 1e-15));

        let c = fig4_curve();
        let h = 1e-6;
        let d = c.deriv(0.4).unwrap();
        let fp = c.eval(0.4 + h).unwrap();
        let fm = c.eval(0.4 - h).unwrap();
        for i in 0..2 {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!((d[i] - fd).abs() <= 1e-6 * d[i].abs().max(1.0));
        }
    }

    #[test]
    fn rational_derivative_matches_fd() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let arc = NurbsCurve::new(KnotVector::bezier(2), vec![[1., 0.], [1., 1.], [0., 1.]], vec![1., s, 1.]).unwrap();
        let h = 1e-6;
        for xi in [0.1, 0.5, 0.9] {
            let d = arc.deriv(xi).unwrap();
            let fp = arc.eval(xi + h).unwrap();
            let fm = arc.eval(xi - h).unwrap();
            for i in 0..2 {
                assert!((d[i] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn knot_insertion_preserves_shape() {
        let c = fig4_curve();
        let r = c.insert_knot(0.4).unwrap();
        assert_eq!(r.points().len(), 6);
        for k in 0..100 {
            let xi = k as f64 / 99.0;
            assert!(close(c.eval(xi).unwrap(), r.eval(xi).unwrap(), 1e-12));
        }
    }

    #[test]
    fn insertion_at_existing_knot_gives_c0() {
        let c = fig4_curve().insert_knot(0.5).unwrap();
        assert_eq!(c.knots().multiplicity(0.5), 2);
        // interpolatory at a C0 knot: curve passes through a control point
        let p = c.eval(0.5).unwrap();
        assert!(c.points().iter().any(|q| close(*q, p, 1e-14)));
        // first-derivative jump of the basis
        let kv = c.knots();
        let left = kv.eval_basis_in_span(kv.left_span(0.5).unwrap(), 0.5, 1);
        let right = kv.eval_basis(0.5, 1).unwrap();
        let mut full_l = vec![0.0; kv.num_basis()];
        let mut full_r = vec![0.0; kv.num_basis()];
        for l in 0..3 {
            full_l[left.first() + l] = left.derivs[1][l];
            full_r[right.first() + l] = right.derivs[1][l];
        }
        let jump: f64 = full_l.iter().zip(&full_r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(jump > 1.0);
    }

    #[test]
    fn insertion_errors() {
        let c = fig4_curve();
        assert!(c.insert_knot(0.0).is_err());
        assert!(c.insert_knot(1.0).is_err());
        let c2 = c.insert_knot(0.5).unwrap();
        assert!(matches!(c2.insert_knot(0.5), Err(SplineError::InvalidInsertion { .. })));
    }

    #[test]
    fn elevate_line() {
        let l = NurbsCurve::polynomial(KnotVector::bezier(1), vec![[0., 0.], [1., 1.]]).unwrap();
        let e = l.elevate_degree(1).unwrap();
        assert_eq!(e.degree(), 2);
        assert_eq!(e.points(), &[[0., 0.], [0.5, 0.5], [1., 1.]]);
        assert!(l.elevate_degree(0).is_err());
    }

    #[test]
    fn elevate_preserves_shape_and_multiplicity() {
        let c = fig4_curve();
        for t in 1..=3 {
            let e = c.elevate_degree(t).unwrap();
            assert_eq!(e.degree(), 2 + t);
            assert_eq!(e.knots().multiplicity(0.3), 1 + t);
            assert_eq!(e.knots().multiplicity(0.0), 3 + t);
            for k in 0..100 {
                let xi = k as f64 / 99.0;
                assert!(close(c.eval(xi).unwrap(), e.eval(xi).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn circle_is_exact() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let kv = KnotVector::new(vec![0., 0., 0., 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1., 1., 1.], 2).unwrap();
        let r = 2.5;
        let pts = [[1., 0.], [1., 1.], [0., 1.], [-1., 1.], [-1., 0.], [-1., -1.], [0., -1.], [1., -1.], [1., 0.]]
            .iter()
            .map(|p| [r * p[0], r * p[1]])
            .collect();
        let w = vec![1., s, 1., s, 1., s, 1., s, 1.];
        let c = NurbsCurve::new(kv, pts, w).unwrap();
        for k in 0..=1000 {
            let p = c.eval(k as f64 / 1000.0).unwrap();
            assert!((p[0].hypot(p[1]) - r).abs() <= 1e-12);
        }
        let e = c.elevate_degree(1).unwrap().insert_knot(0.1).unwrap();
        for k in 0..=200 {
            let p = e.eval(k as f64 / 200.0).unwrap();
            assert!((p[0].hypot(p[1]) - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn reversed_and_compatible() {
        let c = fig4_curve();
        let r = c.reversed();
        for k in 0..20 {
            let xi = k as f64 / 19.0;
            assert!(close(c.eval(xi).unwrap(), r.eval(1.0 - xi).unwrap(), 1e-13));
        }
        let l = NurbsCurve::line([0., 0.], [1., 0.]);
        let (a, b) = NurbsCurve::make_compatible(&c, &l).unwrap();
        assert_eq!(a.knots(), b.knots());
        assert!(close(b.eval(0.37).unwrap(), l.eval(0.37).unwrap(), 1e-14));
    }

    #[test]
    fn serde_round_trip() {
        let c = fig4_curve().elevate_degree(1).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let d: NurbsCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(c, d);
        let bad = s.replace("\"weights\":[1.0", "\"weights\":[-1.0");
        assert!(serde_json::from_str::<NurbsCurve>(&bad).is_err());
    }
}
