use nalgebra::DMatrix;

use super::curve::NurbsCurve;
use super::knots::KnotVector;
use super::refine::solve_lsq;
use super::SplineError;

#[derive(Debug, Clone)]
pub struct FitResult {
    pub curve: NurbsCurve,
    /// Sum of squared distances between samples and the fitted curve.
    pub residual: f64,
    /// Largest single sample distance.
    pub max_error: f64,
}

/// Normalized cumulative chord-length parameters for a polyline.
pub fn chord_length_params(points: &[[f64; 2]]) -> Vec<f64> {
    let mut s = vec![0.0; points.len()];
    for i in 1..points.len() {
        let d = (points[i][0] - points[i - 1][0]).hypot(points[i][1] - points[i - 1][1]);
        s[i] = s[i - 1] + d;
    }
    let total = *s.last().unwrap_or(&0.0);
    if total > 0.0 {
        for v in s.iter_mut() {
            *v /= total;
        }
        *s.last_mut().unwrap() = 1.0;
    }
    s
}

/// Polynomial least-squares fit in the space of `kv`. With `fix_endpoints`, the first
/// and last control points are pinned to the first and last samples and removed from
/// the unknowns.
pub fn least_squares_fit(
    samples: &[(f64, [f64; 2])],
    kv: &KnotVector,
    fix_endpoints: bool,
) -> Result<FitResult, SplineError> {
    let n = kv.num_basis();
    let mut fixed = vec![[None, None]; n];
    if fix_endpoints {
        if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
            fixed[0] = [Some(first.1[0]), Some(first.1[1])];
            fixed[n - 1] = [Some(last.1[0]), Some(last.1[1])];
        }
    }
    least_squares_fit_pinned(samples, kv, &fixed)
}

/// Least-squares fit where single coordinates of control points may be pinned;
/// `fixed[i][c]` holds the prescribed coordinate `c` of control point `i`.
pub fn least_squares_fit_pinned(
    samples: &[(f64, [f64; 2])],
    kv: &KnotVector,
    fixed: &[[Option<f64>; 2]],
) -> Result<FitResult, SplineError> {
    if samples.is_empty() {
        return Err(SplineError::InvalidSamples("no samples".into()));
    }
    if samples.iter().any(|(t, p)| !(0.0..=1.0).contains(t) || !p[0].is_finite() || !p[1].is_finite()) {
        return Err(SplineError::InvalidSamples("parameters must lie in [0, 1]".into()));
    }
    if samples.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(SplineError::InvalidSamples("parameters must be non-decreasing".into()));
    }
    let n = kv.num_basis();
    if fixed.len() != n {
        return Err(SplineError::InvalidSamples("one pin entry per control point expected".into()));
    }
    let basis = samples
        .iter()
        .map(|(t, _)| kv.eval_basis(*t, 0))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = vec![[0.0; 2]; n];
    for c in 0..2 {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i][c].is_none()).collect();
        for i in 0..n {
            if let Some(v) = fixed[i][c] {
                points[i][c] = v;
            }
        }
        if free.is_empty() {
            continue;
        }
        if samples.len() < free.len() {
            return Err(SplineError::RankDeficient {
                rank: samples.len(),
                needed: free.len(),
            });
        }
        let mut col = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            col[i] = k;
        }
        let mut a = DMatrix::zeros(samples.len(), free.len());
        let mut rhs = DMatrix::zeros(samples.len(), 1);
        for (r, ((_, pt), b)) in samples.iter().zip(&basis).enumerate() {
            let mut target = pt[c];
            for (l, v) in b.values().iter().enumerate() {
                let i = b.first() + l;
                match fixed[i][c] {
                    Some(p) => target -= v * p,
                    None => a[(r, col[i])] = *v,
                }
            }
            rhs[(r, 0)] = target;
        }
        let sol = solve_lsq(&a, &rhs)?;
        for (k, &i) in free.iter().enumerate() {
            points[i][c] = sol[(k, 0)];
        }
    }
    let curve = NurbsCurve::polynomial(kv.clone(), points)?;
    let mut residual = 0.0;
    let mut max_error: f64 = 0.0;
    for (t, pt) in samples {
        let c = curve.eval(*t)?;
        let d2 = (c[0] - pt[0]).powi(2) + (c[1] - pt[1]).powi(2);
        residual += d2;
        max_error = max_error.max(d2.sqrt());
    }
    Ok(FitResult {
        curve,
        residual,
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(c: &NurbsCurve, m: usize) -> Vec<(f64, [f64; 2])> {
        (0..m)
            .map(|k| {
                let t = k as f64 / (m - 1) as f64;
                (t, c.eval(t).unwrap())
            })
            .collect()
    }

    #[test]
    fn recovers_curve_in_space() {
        let kv = KnotVector::new(vec![0., 0., 0., 0.3, 0.5, 1., 1., 1.], 2).unwrap();
        let c = NurbsCurve::polynomial(kv.clone(), vec![[0., 1.], [1., -1.], [3., 2.], [5., 4.], [7., 1.]]).unwrap();
        for fix in [false, true] {
            let f = least_squares_fit(&sample(&c, 40), &kv, fix).unwrap();
            for (p, q) in f.curve.points().iter().zip(c.points()) {
                assert!((p[0] - q[0]).abs() < 1e-10 && (p[1] - q[1]).abs() < 1e-10);
            }
            assert!(f.residual < 1e-20);
        }
    }

    #[test]
    fn straight_line_stays_straight() {
        let pts: Vec<[f64; 2]> = (0..30).map(|k| [0.1 * k as f64, 0.3 * k as f64 + 1.0]).collect();
        let params = chord_length_params(&pts);
        let samples: Vec<_> = params.into_iter().zip(pts.iter().copied()).collect();
        let kv = KnotVector::uniform(3, 3, 2).unwrap();
        let f = least_squares_fit(&samples, &kv, true).unwrap();
        assert_eq!(f.curve.start(), pts[0]);
        assert_eq!(f.curve.end(), pts[29]);
        for p in f.curve.points() {
            assert!((p[1] - (3.0 * p[0] + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn nested_spaces_do_not_increase_residual() {
        // quarter-ellipse polyline with a kink
        let mut pts = Vec::new();
        for k in 0..60 {
            let a = k as f64 / 59.0 * std::f64::consts::FRAC_PI_2;
            pts.push([0.05 * a.cos(), 0.02 * a.sin() + if k > 30 { 0.003 } else { 0.0 }]);
        }
        let samples: Vec<_> = chord_length_params(&pts).into_iter().zip(pts).collect();
        let kv = KnotVector::bezier(7);
        let coarse = least_squares_fit(&samples, &kv, true).unwrap();
        let refined_kv = coarse.curve.insert_knot(0.5).unwrap().knots().clone();
        let fine = least_squares_fit(&samples, &refined_kv, true).unwrap();
        assert!(fine.residual <= coarse.residual * (1.0 + 1e-12));
    }

    #[test]
    fn too_few_samples_is_rank_deficient() {
        let kv = KnotVector::bezier(5);
        let samples = vec![(0.0, [0., 0.]), (0.5, [1., 1.]), (1.0, [2., 0.])];
        assert!(matches!(
            least_squares_fit(&samples, &kv, true),
            Err(SplineError::RankDeficient { .. })
        ));
        // enough rows but all at one parameter
        let samples: Vec<_> = (0..10).map(|_| (0.5, [1., 1.])).collect();
        assert!(least_squares_fit(&samples, &kv, false).is_err());
    }

    #[test]
    fn pinned_coordinates_are_kept_and_free_ones_fitted() {
        // samples of a cubic whose second control point has z = 0
        let kv = KnotVector::bezier(3);
        let c = NurbsCurve::polynomial(kv.clone(), vec![[0., 0.], [1., 0.], [2., 1.], [3., 0.]]).unwrap();
        let s = sample(&c, 30);
        let mut fixed = vec![[None, None]; 4];
        fixed[0] = [Some(0.0), Some(0.0)];
        fixed[1][1] = Some(0.0);
        let fit = least_squares_fit_pinned(&s, &kv, &fixed).unwrap();
        assert!(fit.max_error < 1e-12);
        assert_eq!(fit.curve.points()[1][1], 0.0);
        assert!(least_squares_fit_pinned(&s, &kv, &fixed[..3]).is_err());
    }
}
