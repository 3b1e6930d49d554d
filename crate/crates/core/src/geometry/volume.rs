use super::model::MultiPatchModel;
use super::GeometryError;
use crate::quadrature::gauss_legendre;
use crate::spline::NurbsCurve;

/// Volume of the solid obtained by revolving the region enclosed by `curves` about
/// the z-axis. Consecutive curves must join; a gap is accepted only when both ends
/// lie on the axis.
pub fn volume_of_revolution(curves: &[NurbsCurve]) -> Result<f64, GeometryError> {
    if curves.is_empty() {
        return Err(GeometryError::OpenLoop("no boundary curves".into()));
    }
    let scale = curves
        .iter()
        .flat_map(|c| c.points().iter())
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    for k in 0..curves.len() {
        let a = curves[k].end();
        let b = curves[(k + 1) % curves.len()].start();
        let joined = (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;
        let on_axis = a[0].abs() <= tol && b[0].abs() <= tol;
        if !joined && !on_axis {
            return Err(GeometryError::OpenLoop(format!(
                "curve {k} ends at ({:.6e}, {:.6e}) but next starts at ({:.6e}, {:.6e})",
                a[0], a[1], b[0], b[1]
            )));
        }
    }
    let mut acc = 0.0;
    for c in curves {
        acc += flux_integral(c);
    }
    Ok(std::f64::consts::PI * acc.abs())
}

/// ∫ ρ² dz along one curve.
fn flux_integral(c: &NurbsCurve) -> f64 {
    let p = c.degree();
    let (npts, nsub) = if c.is_polynomial() {
        ((3 * p).div_ceil(2) + 1, 1)
    } else {
        (3 * p + 8, 8)
    };
    let (x, w) = gauss_legendre(npts);
    let bps = c.knots().breakpoints();
    let mut sum = 0.0;
    for win in bps.windows(2) {
        let span = c.knots().find_span(win[0]).expect("breakpoint in range");
        for s in 0..nsub {
            let a = win[0] + (win[1] - win[0]) * s as f64 / nsub as f64;
            let b = win[0] + (win[1] - win[0]) * (s + 1) as f64 / nsub as f64;
            let h = b - a;
            for (xq, wq) in x.iter().zip(&w) {
                let t = a + h * xq;
                let (pt, d) = c.eval_in_span(span, t);
                sum += wq * h * pt[0] * pt[0] * d[1];
            }
        }
    }
    sum
}

/// Volume of the electrode described by the model's electrode loop, in m³.
pub fn electrode_volume(model: &MultiPatchModel) -> Result<f64, GeometryError> {
    if model.electrode_loop.is_empty() {
        return Err(GeometryError::OpenLoop("model has no electrode loop".into()));
    }
    let curves: Vec<NurbsCurve> = model.electrode_loop.iter().map(|&r| model.side_curve(r)).collect();
    volume_of_revolution(&curves)
}
