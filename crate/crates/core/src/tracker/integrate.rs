use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{velocity, FieldInterpolator, Macroparticle, TrackError, ELECTRON_MASS, ELEMENTARY_CHARGE, SPEED_OF_LIGHT};
use crate::iga::Fieldmap;

/// `e / (m_e c)`: momentum change in units of `m_e c` per second per V/m.
const FORCE_SCALE: f64 = ELEMENTARY_CHARGE / (ELECTRON_MASS * SPEED_OF_LIGHT);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// fixed time step in s
    pub dt: f64,
    /// first snapshot plane (the cathode) in m
    pub z_start: f64,
    /// last snapshot plane in m; particles crossing it have exited
    pub z_exit: f64,
    /// snapshot planes, equally spaced from `z_start` to `z_exit`
    pub n_planes: usize,
    /// tracking stops this long after the first emission
    pub max_time: f64,
    pub particles: usize,
    pub seed: u64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            dt: 0.244e-12,
            z_start: 0.0,
            z_exit: 0.125,
            n_planes: 126,
            max_time: 10e-9,
            particles: 2048,
            seed: 1,
        }
    }
}

impl TrackingConfig {
    pub fn check(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("time step must be positive");
        }
        if !(self.z_exit > self.z_start && self.z_start.is_finite() && self.z_exit.is_finite()) {
            return bad("need z_start < z_exit");
        }
        if self.n_planes < 2 {
            return bad("need at least two planes");
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return bad("max_time must be positive");
        }
        Ok(())
    }

    pub fn planes(&self) -> Vec<f64> {
        let n = self.n_planes - 1;
        (0..=n).map(|k| self.z_start + (self.z_exit - self.z_start) * k as f64 / n as f64).collect()
    }

    /// One refinement step: half the time step and twice the particles.
    pub fn refined(&self) -> TrackingConfig {
        TrackingConfig {
            dt: 0.5 * self.dt,
            particles: 2 * self.particles,
            ..self.clone()
        }
    }
}

/// Particle state where it crossed a plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneHit {
    pub particle: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// momentum in units of `m_e c`
    pub momentum: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Exited,
    Lost,
    Stalled,
}

struct Outcome {
    hits: Vec<(usize, PlaneHit)>,
    fate: Fate,
    last: Macroparticle,
    steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub planes: Vec<f64>,
    /// per plane, the hits ordered by particle index
    pub snapshots: Vec<Vec<PlaneHit>>,
    /// particle states when tracking stopped; lost particles are frozen with `alive` false
    pub last: Vec<Macroparticle>,
    pub exited: usize,
    pub lost: usize,
    pub stalled: usize,
    /// largest number of steps taken by one particle
    pub max_steps: usize,
}

type State = [f64; 6];

fn axpy(s: &State, h: f64, k: &State) -> State {
    std::array::from_fn(|i| s[i] + h * k[i])
}

fn hermite(a: f64, b: f64, da: f64, db: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    // written around `a` so constant data comes back exactly
    a + (b - a) * (3.0 * s2 - 2.0 * s3) + h * (da * (s3 - 2.0 * s2 + s) + db * (s3 - s2))
}

struct Stepper<'a> {
    field: FieldInterpolator<'a>,
}

impl Stepper<'_> {
    fn deriv(&self, s: &State) -> Option<State> {
        let e = self.field.field_at(s[0], s[1], s[2])?;
        let v = velocity([s[3], s[4], s[5]]);
        Some([v[0], v[1], v[2], -FORCE_SCALE * e[0], -FORCE_SCALE * e[1], -FORCE_SCALE * e[2]])
    }

    fn rk4(&self, s: &State, k1: &State, h: f64) -> Option<State> {
        let k2 = self.deriv(&axpy(s, 0.5 * h, k1))?;
        let k3 = self.deriv(&axpy(s, 0.5 * h, &k2))?;
        let k4 = self.deriv(&axpy(s, h, &k3))?;
        Some(std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
    }

    /// Crossing of plane `z` inside a step, from cubic Hermite interpolation of
    /// the trajectory in time. `db` may lack the force at the end point, in which
    /// case the momentum is interpolated linearly.
    #[allow(clippy::too_many_arguments)]
    fn crossing(particle: usize, z: f64, t: f64, h: f64, a: &State, da: &State, b: &State, db_pos: [f64; 3], db_force: Option<[f64; 3]>) -> PlaneHit {
        let zs = |s: f64| hermite(a[2], b[2], da[2], db_pos[2], h, s) - z;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if zs(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let momentum = std::array::from_fn(|i| match db_force {
            Some(f) => hermite(a[3 + i], b[3 + i], da[3 + i], f[i], h, s),
            None => a[3 + i] + s * (b[3 + i] - a[3 + i]),
        });
        PlaneHit {
            particle,
            t: t + s * h,
            x: hermite(a[0], b[0], da[0], db_pos[0], h, s),
            y: hermite(a[1], b[1], da[1], db_pos[1], h, s),
            momentum,
        }
    }

    fn run(&self, index: usize, p: &Macroparticle, planes: &[f64], t0: f64, cfg: &TrackingConfig) -> Outcome {
        let mut s: State = [p.position[0], p.position[1], p.position[2], p.momentum[0], p.momentum[1], p.momentum[2]];
        let mut t = p.t_emit;
        let freeze = |s: &State, t: f64, alive: bool| Macroparticle {
            position: [s[0], s[1], s[2]],
            momentum: [s[3], s[4], s[5]],
            t_emit: t,
            alive,
        };
        let mut hits = Vec::new();
        let Some(mut ds) = self.deriv(&s) else {
            return Outcome {
                hits,
                fate: Fate::Lost,
                last: freeze(&s, t, false),
                steps: 0,
            };
        };
        // planes at or behind the start are recorded at emission
        let mut next = 0;
        while next < planes.len() && planes[next] <= s[2] {
            hits.push((
                next,
                PlaneHit {
                    particle: index,
                    t,
                    x: s[0],
                    y: s[1],
                    momentum: [s[3], s[4], s[5]],
                },
            ));
            next += 1;
        }
        if next == planes.len() {
            return Outcome {
                hits,
                fate: Fate::Exited,
                last: freeze(&s, t, true),
                steps: 0,
            };
        }
        // the first step ends on the common time grid t0 + k dt
        let k = ((t - t0) / cfg.dt).floor() + 1.0;
        let mut h = t0 + k * cfg.dt - t;
        if h <= 0.0 {
            h = cfg.dt;
        }
        let t_end = t0 + cfg.max_time;
        let mut steps = 0;
        while t < t_end {
            steps += 1;
            let Some(b) = self.rk4(&s, &ds, h) else {
                return Outcome {
                    hits,
                    fate: Fate::Lost,
                    last: freeze(&s, t, false),
                    steps,
                };
            };
            let db = self.deriv(&b);
            let vb = velocity([b[3], b[4], b[5]]);
            while next < planes.len() && b[2] >= planes[next] {
                let force = db.map(|d| [d[3], d[4], d[5]]);
                hits.push((next, Self::crossing(index, planes[next], t, h, &s, &ds, &b, vb, force)));
                next += 1;
            }
            if next == planes.len() {
                return Outcome {
                    hits,
                    fate: Fate::Exited,
                    last: freeze(&b, t + h, true),
                    steps,
                };
            }
            let Some(db) = db else {
                return Outcome {
                    hits,
                    fate: Fate::Lost,
                    last: freeze(&b, t + h, false),
                    steps,
                };
            };
            s = b;
            ds = db;
            t += h;
            h = cfg.dt;
        }
        Outcome {
            hits,
            fate: Fate::Stalled,
            last: freeze(&s, t, true),
            steps,
        }
    }
}

/// Tracks every particle independently with fixed-step RK4 on the relativistic
/// equations of motion of an electron, `du/dt = −e E / (m_e c)` and
/// `dx/dt = c u / √(1 + u²)`. All particles share the time grid that starts at the
/// earliest emission; each one joins at its own emission time. Particles that
/// reach a masked or out-of-map point are frozen and counted as lost.
pub fn track(bunch: &[Macroparticle], map: &Fieldmap, cfg: &TrackingConfig) -> Result<TrackResult, TrackError> {
    cfg.check()?;
    let g = &map.grid;
    if cfg.z_start < g.z0 || cfg.z_exit > g.z1 {
        return Err(TrackError::InvalidConfig(format!(
            "planes [{}, {}] leave the fieldmap range [{}, {}]",
            cfg.z_start, cfg.z_exit, g.z0, g.z1
        )));
    }
    if bunch.is_empty() {
        return Err(TrackError::InvalidSource("empty bunch".into()));
    }
    if bunch.iter().any(|p| p.position.iter().chain(&p.momentum).chain([&p.t_emit]).any(|v| !v.is_finite())) {
        return Err(TrackError::InvalidSource("non-finite particle state".into()));
    }
    let planes = cfg.planes();
    let t0 = bunch.iter().map(|p| p.t_emit).fold(f64::INFINITY, f64::min);
    let stepper = Stepper {
        field: FieldInterpolator::new(map),
    };
    let outcomes: Vec<Outcome> = bunch
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            if p.alive {
                stepper.run(k, p, &planes, t0, cfg)
            } else {
                Outcome {
                    hits: Vec::new(),
                    fate: Fate::Lost,
                    last: *p,
                    steps: 0,
                }
            }
        })
        .collect();
    let mut snapshots = vec![Vec::new(); planes.len()];
    let mut result = TrackResult {
        planes,
        snapshots: Vec::new(),
        last: Vec::with_capacity(bunch.len()),
        exited: 0,
        lost: 0,
        stalled: 0,
        max_steps: 0,
    };
    for o in outcomes {
        for (k, h) in o.hits {
            snapshots[k].push(h);
        }
        match o.fate {
            Fate::Exited => result.exited += 1,
            Fate::Lost => result.lost += 1,
            Fate::Stalled => result.stalled += 1,
        }
        result.max_steps = result.max_steps.max(o.steps);
        result.last.push(o.last);
    }
    result.snapshots = snapshots;
    Ok(result)
}
