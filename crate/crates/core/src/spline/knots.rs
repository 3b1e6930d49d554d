//! Open knot vectors and Cox-de Boor basis evaluation.

use serde::{Deserialize, Serialize};

use super::SplineError;

/// Non-decreasing, open knot vector on `[0, 1]` together with its degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnotVector", into = "RawKnotVector")]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct RawKnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl TryFrom<RawKnotVector> for KnotVector {
    type Error = SplineError;

    fn try_from(raw: RawKnotVector) -> Result<Self, Self::Error> {
        KnotVector::new(raw.knots, raw.degree)
    }
}

impl From<KnotVector> for RawKnotVector {
    fn from(kv: KnotVector) -> Self {
        RawKnotVector {
            degree: kv.degree,
            knots: kv.knots,
        }
    }
}

/// Non-zero basis functions (and optionally their derivatives) on one knot span.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpan {
    /// Index of the knot interval; basis functions `span - p ..= span` are non-zero.
    pub span: usize,
    /// `derivs[k][i]` is the k-th derivative of basis function `span - p + i`.
    /// `derivs[0]` holds the values.
    pub derivs: Vec<Vec<f64>>,
}

impl BasisSpan {
    pub fn values(&self) -> &[f64] {
        &self.derivs[0]
    }

    /// Global index of the first non-zero basis function.
    pub fn first(&self) -> usize {
        self.span + 1 - self.derivs[0].len()
    }
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, SplineError> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(SplineError::InvalidKnots(format!(
                "{} knots is too few for degree {p}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite() || *k < 0.0 || *k > 1.0) {
            return Err(SplineError::InvalidKnots("knots must lie in [0, 1]".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::InvalidKnots("knots must be non-decreasing".into()));
        }
        let n = knots.len();
        if knots[..=p].iter().any(|&k| k != 0.0) || knots[n - p - 1..].iter().any(|&k| k != 1.0) {
            return Err(SplineError::InvalidKnots(format!(
                "knot vector must be open: first and last knots repeated {} times at 0 and 1",
                p + 1
            )));
        }
        let kv = KnotVector { knots, degree };
        for u in kv.unique_interior() {
            if kv.multiplicity(u) > p {
                return Err(SplineError::InvalidKnots(format!(
                    "interior knot {u} has multiplicity above the degree"
                )));
            }
        }
        Ok(kv)
    }

    /// Open knot vector with `n_elem` equal elements and interior multiplicity `p - continuity`.
    pub fn uniform(degree: usize, n_elem: usize, continuity: usize) -> Result<Self, SplineError> {
        if n_elem == 0 {
            return Err(SplineError::InvalidKnots("at least one element required".into()));
        }
        if continuity >= degree.max(1) && n_elem > 1 {
            return Err(SplineError::InvalidKnots(format!(
                "continuity {continuity} must be below degree {degree}"
            )));
        }
        let mult = degree - continuity.min(degree);
        let mut knots = vec![0.0; degree + 1];
        for e in 1..n_elem {
            let u = e as f64 / n_elem as f64;
            knots.extend(std::iter::repeat_n(u, mult));
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        KnotVector::new(knots, degree)
    }

    /// Knot vector of a single polynomial piece (Bernstein basis).
    pub fn bezier(degree: usize) -> Self {
        let mut knots = vec![0.0; degree + 1];
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        KnotVector { knots, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Number of basis functions.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Distinct interior knot values in increasing order.
    pub fn unique_interior(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if k > 0.0 && k < 1.0 && out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Distinct breakpoints including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(self.unique_interior());
        out.push(1.0);
        out
    }

    /// Greville abscissae (knot averages), one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.num_basis())
                .map(|i| 0.5 * (self.knots[i] + self.knots[i + 1]))
                .collect();
        }
        (0..self.num_basis())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Index `i` with `knots[i] <= xi < knots[i + 1]`; `xi = 1` maps to the last
    /// non-empty interval.
    pub fn find_span(&self, xi: f64) -> Result<usize, SplineError> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(SplineError::ParameterOutOfRange(xi));
        }
        Ok(self.span_unchecked(xi))
    }

    pub(crate) fn span_unchecked(&self, xi: f64) -> usize {
        let p = self.degree;
        let n = self.num_basis() - 1;
        if xi >= self.knots[n + 1] {
            return n;
        }
        if xi <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n + 1);
        let mut mid = (lo + hi) / 2;
        while xi < self.knots[mid] || xi >= self.knots[mid + 1] {
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }

    /// Span index to use when a one-sided limit from the left is wanted at `xi`.
    pub fn left_span(&self, xi: f64) -> Result<usize, SplineError> {
        let mut span = self.find_span(xi)?;
        while span > self.degree && self.knots[span] >= xi {
            span -= 1;
        }
        Ok(span)
    }

    /// Basis values and derivatives up to `n_derivs` at `xi`.
    pub fn eval_basis(&self, xi: f64, n_derivs: usize) -> Result<BasisSpan, SplineError> {
        if n_derivs > self.degree {
            return Err(SplineError::DerivativeOrder {
                order: n_derivs,
                degree: self.degree,
            });
        }
        let span = self.find_span(xi)?;
        Ok(self.eval_basis_in_span(span, xi, n_derivs))
    }

    /// Evaluates the polynomial pieces belonging to knot span `span` at `xi`,
    /// which may lie on the closure of that span.
    pub fn eval_basis_in_span(&self, span: usize, xi: f64, n_derivs: usize) -> BasisSpan {
        let p = self.degree;
        let u = &self.knots;
        let nd = n_derivs.min(p);
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; n_derivs + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=nd {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        BasisSpan { span, derivs: ders }
    }

    /// Returns the knot vector with `u` inserted once (no validity check on multiplicity).
    pub(crate) fn with_inserted(&self, u: f64) -> KnotVector {
        let pos = self.knots.partition_point(|&k| k <= u);
        let mut knots = self.knots.clone();
        knots.insert(pos, u);
        KnotVector {
            knots,
            degree: self.degree,
        }
    }

    pub(crate) fn from_parts_unchecked(knots: Vec<f64>, degree: usize) -> KnotVector {
        KnotVector { knots, degree }
    }
}
