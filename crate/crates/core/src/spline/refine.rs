//! Knot insertion and degree elevation on coefficient vectors of arbitrary length.
//!
//! Curves pass homogeneous control points; surfaces pass whole rows of the net
//! flattened into one vector per index of the refined direction.

use nalgebra::{DMatrix, DVector};

use super::knots::KnotVector;
use super::SplineError;

pub(crate) type Coeffs = Vec<Vec<f64>>;

/// Single Boehm insertion of `u`, no validity check.
pub(crate) fn insert_once(kv: &KnotVector, ctrl: &[Vec<f64>], u: f64) -> (KnotVector, Coeffs) {
    let p = kv.degree();
    let t = kv.knots();
    let k = kv.span_unchecked(u);
    let n = ctrl.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i + p <= k {
            out.push(ctrl[i].clone());
        } else if i > k {
            out.push(ctrl[i - 1].clone());
        } else {
            let a = (u - t[i]) / (t[i + p] - t[i]);
            out.push(
                ctrl[i]
                    .iter()
                    .zip(&ctrl[i - 1])
                    .map(|(c, d)| a * c + (1.0 - a) * d)
                    .collect(),
            );
        }
    }
    (kv.with_inserted(u), out)
}

pub(crate) fn check_insertion(kv: &KnotVector, u: f64) -> Result<(), SplineError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(SplineError::InvalidInsertion {
            knot: u,
            reason: "knot must lie strictly inside (0, 1)".into(),
        });
    }
    if kv.multiplicity(u) >= kv.degree() {
        return Err(SplineError::InvalidInsertion {
            knot: u,
            reason: format!("multiplicity would exceed degree {}", kv.degree()),
        });
    }
    Ok(())
}

/// Inserts every interior knot up to multiplicity `p`.
fn bezier_decompose(kv: &KnotVector, ctrl: &[Vec<f64>]) -> (KnotVector, Coeffs) {
    let p = kv.degree();
    let mut kv = kv.clone();
    let mut ctrl = ctrl.to_vec();
    for u in kv.unique_interior() {
        for _ in kv.multiplicity(u)..p {
            let (k2, c2) = insert_once(&kv, &ctrl, u);
            kv = k2;
            ctrl = c2;
        }
    }
    (kv, ctrl)
}

fn elevate_bezier(seg: &[Vec<f64>], t: usize) -> Coeffs {
    let mut cur = seg.to_vec();
    for _ in 0..t {
        let p = cur.len() - 1;
        let mut next = Vec::with_capacity(p + 2);
        next.push(cur[0].clone());
        for i in 1..=p {
            let a = i as f64 / (p + 1) as f64;
            next.push(
                cur[i - 1]
                    .iter()
                    .zip(&cur[i])
                    .map(|(x, y)| a * x + (1.0 - a) * y)
                    .collect(),
            );
        }
        next.push(cur[p].clone());
        cur = next;
    }
    cur
}

/// Knot vector with every distinct knot's multiplicity raised by `t`.
pub(crate) fn elevated_knots(kv: &KnotVector, t: usize) -> KnotVector {
    let mut knots = Vec::new();
    let bps = kv.breakpoints();
    for &u in &bps {
        let m = kv.multiplicity(u);
        knots.extend(std::iter::repeat_n(u, m + t));
    }
    KnotVector::from_parts_unchecked(knots, kv.degree() + t)
}

/// Degree elevation by Bézier decomposition, Bernstein elevation of each piece,
/// and recomposition into the space with multiplicities raised by `t`.
pub(crate) fn elevate(kv: &KnotVector, ctrl: &[Vec<f64>], t: usize) -> Result<(KnotVector, Coeffs), SplineError> {
    if t == 0 || kv.degree() == 0 {
        return Err(SplineError::InvalidElevation);
    }
    let p = kv.degree();
    let (_, bez) = bezier_decompose(kv, ctrl);
    let nseg = (bez.len() - 1) / p;
    let q = p + t;
    let mut elevated: Coeffs = Vec::with_capacity(nseg * q + 1);
    for s in 0..nseg {
        let seg = elevate_bezier(&bez[s * p..=s * p + p], t);
        let skip = if s == 0 { 0 } else { 1 };
        elevated.extend(seg.into_iter().skip(skip));
    }
    let target = elevated_knots(kv, t);
    if kv.unique_interior().iter().all(|&u| kv.multiplicity(u) == p) {
        return Ok((target, elevated));
    }
    // Refinement matrix from the target space to its Bézier form.
    let n = target.num_basis();
    let identity: Coeffs = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let (_, rows) = bezier_decompose(&target, &identity);
    let m = rows.len();
    let r = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let dim = ctrl[0].len();
    let rhs = DMatrix::from_fn(m, dim, |i, j| elevated[i][j]);
    let sol = solve_lsq(&r, &rhs)?;
    let out = (0..n).map(|i| (0..dim).map(|j| sol[(i, j)]).collect()).collect();
    Ok((target, out))
}

/// Least-squares solve of a full-column-rank system through QR.
pub(crate) fn solve_lsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, SplineError> {
    let n = a.ncols();
    let qr = a.clone().qr();
    let rmat = qr.r();
    let scale = (0..n).map(|i| rmat[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..n)
        .filter(|&i| rmat[(i, i)].abs() > 1e-12 * scale.max(f64::MIN_POSITIVE))
        .count();
    if rank < n {
        return Err(SplineError::RankDeficient { rank, needed: n });
    }
    let qtb = qr.q().transpose() * b;
    let mut x = DMatrix::zeros(n, b.ncols());
    for c in 0..b.ncols() {
        let col: DVector<f64> = qtb.column(c).rows(0, n).into_owned();
        let sol = rmat
            .solve_upper_triangular(&col)
            .ok_or(SplineError::RankDeficient { rank, needed: n })?;
        x.set_column(c, &sol);
    }
    Ok(x)
}
