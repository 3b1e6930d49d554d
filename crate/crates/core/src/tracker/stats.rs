use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{kinetic_energy_ev, velocity, PlaneHit, TrackError, TrackResult};

/// RMS statistics of the particles crossing one plane, from central moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneStats {
    pub z: f64,
    pub count: usize,
    /// m
    pub x_rms: f64,
    pub y_rms: f64,
    /// bunch length from arrival times, `z_i = −v_z,i (t_i − ⟨t⟩)`, in m
    pub z_rms: f64,
    /// normalized transverse emittances in m·rad
    pub eps_x: f64,
    pub eps_y: f64,
    /// longitudinal emittance from the `(z_i, E_kin,i)` moments, in eV·m
    pub eps_z: f64,
    /// mean and RMS kinetic energy in eV
    pub energy_mean: f64,
    pub energy_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamStats {
    pub planes: Vec<PlaneStats>,
}

impl BeamStats {
    pub fn n_z(&self) -> usize {
        self.planes.len()
    }

    pub fn exit(&self) -> &PlaneStats {
        self.planes.last().expect("beam stats always hold at least two planes")
    }

    /// RMS energy spread at the exit plane in eV.
    pub fn energy_spread(&self) -> f64 {
        self.exit().energy_rms
    }

    /// Gnuplot-ready table `z,x_rms,y_rms,z_rms,eps_x,eps_y,eps_z` after the given
    /// header comment lines.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str("z,x_rms,y_rms,z_rms,eps_x,eps_y,eps_z\n");
        for p in &self.planes {
            let _ = writeln!(s, "{:e},{:e},{:e},{:e},{:e},{:e},{:e}", p.z, p.x_rms, p.y_rms, p.z_rms, p.eps_x, p.eps_y, p.eps_z);
        }
        s
    }

    fn column(&self, q: usize) -> Vec<f64> {
        self.planes
            .iter()
            .map(|p| [p.x_rms, p.y_rms, p.z_rms, p.eps_x, p.eps_y, p.eps_z][q])
            .collect()
    }
}

/// Mean shifted by the first value, exact for constant data.
fn mean(v: &[f64]) -> f64 {
    v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / v.len() as f64
}

/// Central second moments `(⟨a²⟩, ⟨b²⟩, ⟨ab⟩)`.
fn moments(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64;
    let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        aa += dx * dx;
        bb += dy * dy;
        ab += dx * dy;
    }
    (aa / n, bb / n, ab / n)
}

/// `√(⟨a²⟩⟨b²⟩ − ⟨ab⟩²)`, with rounding below zero clamped.
fn emittance(a: &[f64], b: &[f64]) -> f64 {
    let (aa, bb, ab) = moments(a, b);
    (aa * bb - ab * ab).max(0.0).sqrt()
}

pub fn plane_stats(plane: usize, z: f64, hits: &[PlaneHit]) -> Result<PlaneStats, TrackError> {
    if hits.len() < 2 {
        return Err(TrackError::EmptyPlane { plane, z, count: hits.len() });
    }
    let col = |f: &dyn Fn(&PlaneHit) -> f64| -> Vec<f64> { hits.iter().map(f).collect() };
    let x = col(&|h| h.x);
    let y = col(&|h| h.y);
    let ux = col(&|h| h.momentum[0]);
    let uy = col(&|h| h.momentum[1]);
    let t = col(&|h| h.t);
    let energy = col(&|h| kinetic_energy_ev(h.momentum));
    let tm = mean(&t);
    let zl: Vec<f64> = hits.iter().zip(&t).map(|(h, ti)| -velocity(h.momentum)[2] * (ti - tm)).collect();
    let (xx, _, _) = moments(&x, &x);
    let (yy, _, _) = moments(&y, &y);
    let (zz, ee, _) = moments(&zl, &energy);
    Ok(PlaneStats {
        z,
        count: hits.len(),
        x_rms: xx.sqrt(),
        y_rms: yy.sqrt(),
        z_rms: zz.sqrt(),
        eps_x: emittance(&x, &ux),
        eps_y: emittance(&y, &uy),
        eps_z: emittance(&zl, &energy),
        energy_mean: mean(&energy),
        energy_rms: ee.sqrt(),
    })
}

/// Per-plane statistics of a tracking run; lost particles only count on the planes
/// they crossed.
pub fn beam_stats(result: &TrackResult) -> Result<BeamStats, TrackError> {
    let planes = result
        .snapshots
        .iter()
        .zip(&result.planes)
        .enumerate()
        .map(|(k, (hits, z))| plane_stats(k, *z, hits))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BeamStats { planes })
}

/// Largest relative deviation over the planes and the planes left out because the
/// reference value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub max_rel: f64,
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceErrors {
    pub x_rms: Deviation,
    pub y_rms: Deviation,
    pub z_rms: Deviation,
    pub eps_x: Deviation,
    pub eps_y: Deviation,
    pub eps_z: Deviation,
}

impl ConvergenceErrors {
    pub const NAMES: [&'static str; 6] = ["x_rms", "y_rms", "z_rms", "eps_x", "eps_y", "eps_z"];

    pub fn entries(&self) -> [(&'static str, &Deviation); 6] {
        [
            ("x_rms", &self.x_rms),
            ("y_rms", &self.y_rms),
            ("z_rms", &self.z_rms),
            ("eps_x", &self.eps_x),
            ("eps_y", &self.eps_y),
            ("eps_z", &self.eps_z),
        ]
    }

    pub fn max(&self) -> f64 {
        self.entries().iter().map(|e| e.1.max_rel).fold(0.0, f64::max)
    }
}

fn deviation(a: &[f64], reference: &[f64]) -> Deviation {
    let mut d = Deviation {
        max_rel: 0.0,
        excluded: Vec::new(),
    };
    for (k, (v, r)) in a.iter().zip(reference).enumerate() {
        if *r == 0.0 {
            d.excluded.push(k);
        } else {
            d.max_rel = d.max_rel.max(((v - r) / r).abs());
        }
    }
    d
}

/// `δ_q = max_k |q_k − q_ref,k| / |q_ref,k|` for the six beam quantities.
pub fn self_convergence(stats: &BeamStats, reference: &BeamStats) -> Result<ConvergenceErrors, TrackError> {
    if stats.n_z() != reference.n_z() {
        return Err(TrackError::PlaneMismatch(stats.n_z(), reference.n_z()));
    }
    let d = |q| deviation(&stats.column(q), &reference.column(q));
    Ok(ConvergenceErrors {
        x_rms: d(0),
        y_rms: d(1),
        z_rms: d(2),
        eps_x: d(3),
        eps_y: d(4),
        eps_z: d(5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hit(k: usize, x: f64, y: f64, t: f64, u: [f64; 3]) -> PlaneHit {
        PlaneHit {
            particle: k,
            t,
            x,
            y,
            momentum: u,
        }
    }

    #[test]
    fn zero_momentum_spread_has_zero_emittance() {
        let hits: Vec<PlaneHit> = (0..50).map(|k| hit(k, (k as f64).sin() * 1e-3, (k as f64).cos() * 2e-3, 0.0, [0.0, 0.0, 0.8])).collect();
        let s = plane_stats(0, 0.1, &hits).unwrap();
        assert_eq!((s.eps_x, s.eps_y, s.eps_z, s.energy_rms, s.z_rms), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(s.x_rms > 0.0);
    }

    #[test]
    fn closed_form_phase_space_pairs() {
        let (a, b) = (2e-3, 3e-4);
        // x = ±a, u_x = ±b correlated: a line in phase space
        let line = [hit(0, a, 0.0, 0.0, [b, 0.0, 1.0]), hit(1, -a, 0.0, 0.0, [-b, 0.0, 1.0])];
        let s = plane_stats(0, 0.0, &line).unwrap();
        assert_eq!(s.eps_x, 0.0);
        assert!((s.x_rms - a).abs() < 1e-18);
        // all four sign combinations: ⟨x u⟩ = 0, ⟨x²⟩ = a², ⟨u²⟩ = b²
        let square: Vec<PlaneHit> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .enumerate()
            .map(|(k, (sx, su))| hit(k, sx * a, 0.0, 0.0, [su * b, 0.0, 1.0]))
            .collect();
        let s = plane_stats(0, 0.0, &square).unwrap();
        assert!((s.eps_x - a * b).abs() < 1e-15 * a * b);
    }

    #[test]
    fn energy_spread_and_bunch_length() {
        // equal speeds, arrivals spread by ±1 ps
        let u = [0.0, 0.0, 1.2];
        let hits = [hit(0, 0.0, 0.0, -1e-12, u), hit(1, 1e-3, 0.0, 1e-12, u)];
        let s = plane_stats(0, 0.1, &hits).unwrap();
        let v = velocity(u)[2];
        assert!((s.z_rms - v * 1e-12).abs() < 1e-18);
        assert!(plane_stats(3, 0.1, &hits[..1]).is_err());
    }

    fn stats_of(values: &[f64]) -> BeamStats {
        BeamStats {
            planes: values
                .iter()
                .map(|v| PlaneStats {
                    z: 0.0,
                    count: 2,
                    x_rms: *v,
                    y_rms: 2.0 * v,
                    z_rms: 3.0 * v,
                    eps_x: 4.0 * v,
                    eps_y: 5.0 * v,
                    eps_z: 6.0 * v,
                    energy_mean: 0.0,
                    energy_rms: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn self_convergence_examples() {
        let a = stats_of(&[0.0, 1.0, 2.5, 1e-3]);
        let same = self_convergence(&a, &a).unwrap();
        assert_eq!(same.max(), 0.0);
        assert!(same.entries().iter().all(|e| e.1.excluded == vec![0]));
        let b = stats_of(&[0.0, 1.05, 2.625, 1.05e-3]);
        let d = self_convergence(&b, &a).unwrap();
        assert!(d.entries().iter().all(|e| (e.1.max_rel - 0.05).abs() < 1e-12));
        assert!(matches!(self_convergence(&a, &stats_of(&[1.0])), Err(TrackError::PlaneMismatch(4, 1))));
    }

    #[test]
    fn csv_layout() {
        let csv = stats_of(&[1.0, 2.0]).to_csv("config_hash=ab seed=1");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=ab seed=1");
        assert_eq!(lines[1], "z,x_rms,y_rms,z_rms,eps_x,eps_y,eps_z");
        assert_eq!(lines.len(), 4);
    }

    fn hits_strategy() -> impl Strategy<Value = Vec<PlaneHit>> {
        prop::collection::vec((-5e-3..5e-3f64, -5e-3..5e-3f64, -1e-11..1e-11f64, -0.1..0.1f64, -0.1..0.1f64, 0.1..2.0f64), 2..60).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (x, y, t, ux, uy, uz))| hit(k, x, y, t, [ux, uy, uz]))
                .collect()
        })
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-300
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling(hits in hits_strategy(), seed: u64) {
            let mut shuffled = hits.clone();
            let n = shuffled.len();
            for k in 0..n {
                let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(k as u64) % n as u64) as usize;
                shuffled.swap(k, j);
            }
            let (a, b) = (plane_stats(0, 0.0, &hits).unwrap(), plane_stats(0, 0.0, &shuffled).unwrap());
            for (p, q) in [(a.x_rms, b.x_rms), (a.y_rms, b.y_rms), (a.z_rms, b.z_rms), (a.energy_rms, b.energy_rms)] {
                prop_assert!(close(p, q));
            }
            // emittances are square roots of differences and lose relative accuracy
            for (p, q, scale) in [(a.eps_x, b.eps_x, a.x_rms * 0.1), (a.eps_y, b.eps_y, a.y_rms * 0.1), (a.eps_z, b.eps_z, a.z_rms * a.energy_rms.max(1.0))] {
                prop_assert!((p - q).abs() <= 1e-6 * scale.max(p));
            }
        }

        #[test]
        fn rotation_about_the_axis_swaps_roles(hits in hits_strategy()) {
            let rotated: Vec<PlaneHit> = hits
                .iter()
                .map(|h| PlaneHit { x: -h.y, y: h.x, momentum: [-h.momentum[1], h.momentum[0], h.momentum[2]], ..*h })
                .collect();
            let (a, b) = (plane_stats(0, 0.0, &hits).unwrap(), plane_stats(0, 0.0, &rotated).unwrap());
            prop_assert!(close(a.x_rms, b.y_rms) && close(a.y_rms, b.x_rms));
            prop_assert!(close(a.eps_x, b.eps_y) && close(a.eps_y, b.eps_x));
            prop_assert!(close(a.z_rms, b.z_rms) && close(a.eps_z, b.eps_z));
        }

        #[test]
        fn cauchy_schwarz_and_non_negativity(hits in hits_strategy()) {
            let x: Vec<f64> = hits.iter().map(|h| h.x).collect();
            let u: Vec<f64> = hits.iter().map(|h| h.momentum[0]).collect();
            let (xx, uu, xu) = moments(&x, &u);
            prop_assert!(xx * uu - xu * xu >= -1e-12 * xx * uu);
            let s = plane_stats(0, 0.0, &hits).unwrap();
            for v in [s.x_rms, s.y_rms, s.z_rms, s.eps_x, s.eps_y, s.eps_z, s.energy_rms] {
                prop_assert!(v >= 0.0 && v.is_finite());
            }
        }
    }
}
