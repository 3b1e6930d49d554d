use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp, SolveOutcome};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{best_index, check_box, EvalRecord, Evaluator, OptimizeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    /// initial trust radius as a fraction of each bound width
    pub rho_begin: f64,
    /// final trust radius, same units
    pub rho_end: f64,
    /// relative change of the best feasible objective below which the search stops
    pub ftol: f64,
    pub max_evals: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            rho_begin: 0.1,
            rho_end: 1e-6,
            ftol: 1e-4,
            max_evals: 2000,
        }
    }
}

impl LocalConfig {
    pub fn check(&self) -> Result<(), OptimizeError> {
        if !(self.rho_begin > 0.0 && self.rho_begin <= 0.5 && self.rho_end > 0.0 && self.rho_end <= self.rho_begin) {
            return Err(OptimizeError::InvalidConfig("need 0 < rho_end ≤ rho_begin ≤ 0.5".into()));
        }
        if !(self.ftol > 0.0) || self.max_evals == 0 {
            return Err(OptimizeError::InvalidConfig("tolerance and budget must be positive".into()));
        }
        Ok(())
    }
}

const MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
struct Vertex {
    s: Vec<f64>,
    f: f64,
    c: Vec<f64>,
}

impl Vertex {
    fn violation(&self) -> f64 {
        self.c.iter().map(|v| v.max(0.0)).sum()
    }

    fn merit(&self, mu: f64) -> f64 {
        self.f + mu * self.violation()
    }
}

struct Scaled<'e, 'a> {
    ev: &'e mut Evaluator<'a>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    scales: Vec<f64>,
}

impl Scaled<'_, '_> {
    fn to_x(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (l + v * (h - l)).clamp(*l, *h))
            .collect()
    }

    fn to_s(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| (v - l) / (h - l)).collect()
    }

    /// `None` for invalid designs or non-finite values.
    fn eval(&mut self, s: &[f64]) -> Result<Option<Vertex>, OptimizeError> {
        let x = self.to_x(s);
        let r = self.ev.evaluate(&x)?;
        if r.invalid || !r.f.is_finite() || r.c.iter().any(|c| !c.is_finite()) {
            return Ok(None);
        }
        let c = r
            .c
            .iter()
            .enumerate()
            .map(|(k, v)| self.scales.get(k).copied().unwrap_or(1.0) * v)
            .collect();
        Ok(Some(Vertex { s: self.to_s(&x), f: r.f, c }))
    }
}

/// `min cost·e` over `e ∈ [lo, hi]` with rows `a·e ≤ b`; `None` when infeasible.
fn lp_min(cost: &[f64], lo: &[f64], hi: &[f64], rows: &[(Vec<f64>, f64)]) -> Result<Option<Vec<f64>>, OptimizeError> {
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..cost.len()).map(|k| lp.add_var(cost[k], (lo[k], hi[k]))).collect();
    for (a, b) in rows {
        let norm = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            if *b < 0.0 {
                return Ok(None);
            }
            continue;
        }
        let terms: Vec<_> = vars.iter().zip(a).map(|(v, c)| (*v, c / norm)).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, b / norm);
    }
    match lp.solve() {
        Ok(SolveOutcome::Solution(sol)) => Ok(Some(vars.iter().map(|v| sol.var_value(*v)).collect())),
        Ok(SolveOutcome::Interrupted(_)) => Err(OptimizeError::Subproblem("interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(OptimizeError::Subproblem(e.to_string())),
    }
}

/// Walks from the feasible `d` along the projected steepest descent of `g·d`,
/// collecting blocking rows `a·d ≤ r` as active, until the ball `‖d‖ ≤ rho` is
/// reached or no descent direction remains.
fn descend_in_ball(g: &[f64], rows: &[(Vec<f64>, f64)], mut d: Vec<f64>, rho: f64) -> Vec<f64> {
    let n = g.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gn = norm2(g);
    if gn == 0.0 {
        return d;
    }
    let mut active: Vec<usize> = Vec::new();
    for _ in 0..4 * (rows.len() + n) {
        // multipliers of the active rows by least squares: min ‖g + Aᵀν‖
        let (s, nu) = if active.is_empty() {
            (g.iter().map(|v| -v).collect::<Vec<f64>>(), Vec::new())
        } else {
            let aw = DMatrix::from_fn(active.len(), n, |r, k| rows[active[r]].0[k]);
            let rhs = -(&aw * DVector::from_column_slice(g));
            let nu = (&aw * aw.transpose()).pseudo_inverse(1e-12).map(|m| m * rhs).unwrap_or_else(|_| DVector::zeros(active.len()));
            let s = -(DVector::from_column_slice(g) + aw.transpose() * &nu);
            (s.iter().copied().collect(), nu.iter().copied().collect())
        };
        if norm2(&s) <= 1e-12 * gn {
            // stationary on the active set: release the most negative multiplier
            let (k, v) = nu.iter().enumerate().fold((0, 0.0), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
            if v < -1e-12 * gn {
                active.remove(k);
                continue;
            }
            break;
        }
        // largest step inside the ball
        let (ss, ds, dd) = (dot(&s, &s), dot(&d, &s), dot(&d, &d));
        let disc = (ds * ds + ss * (rho * rho - dd)).max(0.0);
        let mut alpha = (-ds + disc.sqrt()) / ss;
        let mut block = None;
        for (j, (a, r)) in rows.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            let as_ = dot(a, &s);
            if as_ > 1e-14 * norm2(a) * norm2(&s) {
                let t = ((r - dot(a, &d)) / as_).max(0.0);
                if t < alpha {
                    alpha = t;
                    block = Some(j);
                }
            }
        }
        for (x, v) in d.iter_mut().zip(&s) {
            *x += alpha * v;
        }
        match block {
            Some(j) => active.push(j),
            None => break,
        }
    }
    d
}

/// Trust-region step from linear models: first reduce the linearized violation as
/// far as the region allows, then descend on the linearized objective inside the
/// ball keeping that level.
fn subproblem(g: &[f64], a: &[Vec<f64>], c: &[f64], base: &[f64], rho: f64) -> Result<Vec<f64>, OptimizeError> {
    let n = g.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let worst = c.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut level = 0.0;
    let mut d0 = vec![0.0; n];
    if worst > 0.0 {
        // phase one on the cube inscribed in the ball, in units of its half-width
        let h = rho / (n as f64).sqrt();
        let mut lo: Vec<f64> = base.iter().map(|s| (-s / h).max(-1.0)).collect();
        let mut hi: Vec<f64> = base.iter().map(|s| ((1.0 - s) / h).min(1.0)).collect();
        let mut cost = vec![0.0; n];
        cost.push(1.0);
        lo.push(0.0);
        hi.push(worst);
        let rows: Vec<(Vec<f64>, f64)> = a
            .iter()
            .zip(c)
            .map(|(aj, cj)| {
                let mut r: Vec<f64> = aj.iter().map(|v| v * h).collect();
                r.push(-1.0);
                (r, -cj)
            })
            .collect();
        let e = lp_min(&cost, &lo, &hi, &rows)?.ok_or_else(|| OptimizeError::Subproblem("phase one infeasible".into()))?;
        level = e[n].max(0.0);
        d0 = e[..n].iter().zip(base).map(|(v, s)| (v * h).clamp(-s, 1.0 - s)).collect();
    }
    let slack = 1e-12 * (1.0 + worst);
    let mut rows: Vec<(Vec<f64>, f64)> = a
        .iter()
        .zip(c)
        .map(|(aj, cj)| {
            let r = (level + slack - cj).max(dot(aj, &d0));
            (aj.clone(), r)
        })
        .collect();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        rows.push((e.clone(), (1.0 - base[k]).max(d0[k])));
        e[k] = -1.0;
        rows.push((e, base[k].max(-d0[k])));
    }
    Ok(descend_in_ball(g, &rows, d0, rho))
}

struct Models {
    others: Vec<usize>,
    inv: DMatrix<f64>,
    g: Vec<f64>,
    a: Vec<Vec<f64>>,
}

fn build_models(sim: &[Vertex], b: usize) -> Option<Models> {
    let n = sim[b].s.len();
    let others: Vec<usize> = (0..sim.len()).filter(|&i| i != b).collect();
    let d = DMatrix::from_fn(n, n, |r, k| sim[others[r]].s[k] - sim[b].s[k]);
    let inv = d.try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let df = DVector::from_iterator(n, others.iter().map(|&i| sim[i].f - sim[b].f));
    let g = (&inv * df).iter().copied().collect();
    let m = sim[b].c.len();
    let a = (0..m)
        .map(|j| {
            let dc = DVector::from_iterator(n, others.iter().map(|&i| sim[i].c[j] - sim[b].c[j]));
            (&inv * dc).iter().copied().collect()
        })
        .collect();
    Some(Models { others, inv, g, a })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn best_vertex(sim: &[Vertex], mu: f64, current: usize) -> usize {
    let mut b = current;
    for (i, v) in sim.iter().enumerate() {
        let (mi, mb) = (v.merit(mu), sim[b].merit(mu));
        if mi < mb || (mi == mb && v.violation() < sim[b].violation()) {
            b = i;
        }
    }
    b
}

/// Derivative-free trust-region minimization with linear interpolation models of
/// the objective and every constraint over an `n + 1` point simplex. Works in
/// coordinates scaled to the unit box.
pub fn local_minimize(ev: &mut Evaluator, start: &[f64], cfg: &LocalConfig) -> Result<EvalRecord, OptimizeError> {
    cfg.check()?;
    let (lo, hi) = (ev.problem().lower().to_vec(), ev.problem().upper().to_vec());
    check_box(&lo, &hi)?;
    let n = lo.len();
    if start.len() != n || start.iter().zip(lo.iter().zip(&hi)).any(|(v, (l, h))| !(v >= l && v <= h)) {
        return Err(OptimizeError::InvalidStart);
    }
    let first = ev.count();
    let scales = ev.problem().penalty_scales();
    let mut sp = Scaled { ev, lo, hi, scales };
    let s0 = sp.to_s(start);
    let v0 = sp.eval(&s0)?.ok_or(OptimizeError::InvalidStart)?;
    let mut rho = cfg.rho_begin;
    let mut delta = rho;
    let mut sim = vec![v0];
    for i in 0..n {
        let mut added = false;
        let mut step = rho;
        'tries: for _ in 0..6 {
            let signs = if s0[i] + step <= 1.0 { [1.0, -1.0] } else { [-1.0, 1.0] };
            for sg in signs {
                let mut s = s0.clone();
                s[i] = (s0[i] + sg * step).clamp(0.0, 1.0);
                if (s[i] - s0[i]).abs() < 0.5 * step {
                    continue;
                }
                if let Some(v) = sp.eval(&s)? {
                    sim.push(v);
                    added = true;
                    break 'tries;
                }
            }
            step *= 0.5;
        }
        if !added {
            return Err(OptimizeError::DegenerateSimplex);
        }
    }
    let window = 2 * n + 1;
    let mut mu = 0.0;
    let mut b = best_vertex(&sim, mu, 0);
    let mut repairs = 0;
    loop {
        let used = sp.ev.count() - first;
        if used >= cfg.max_evals {
            break;
        }
        if used >= n + 1 + window {
            let recs = &sp.ev.records()[first..];
            let best_upto = |k: usize| recs[..k].iter().filter(|r| r.feasible()).map(|r| r.f).min_by(|a, b| a.total_cmp(b));
            // a window without any improvement means the models are still being
            // repaired, so only a small but nonzero gain counts as converged
            if let (Some(old), Some(new)) = (best_upto(used - window), best_upto(used)) {
                if new < old && old - new <= cfg.ftol * new.abs() {
                    break;
                }
            }
        }
        b = best_vertex(&sim, mu, b);
        let Some(m) = build_models(&sim, b) else {
            // rebuild around the best vertex
            repairs += 1;
            if repairs > 3 {
                return Err(OptimizeError::DegenerateSimplex);
            }
            let base = sim[b].clone();
            let mut fresh = vec![base.clone()];
            for i in 0..n {
                let mut s = base.s.clone();
                s[i] = if s[i] + rho <= 1.0 { s[i] + rho } else { s[i] - rho };
                if let Some(v) = sp.eval(&s)? {
                    fresh.push(v);
                } else {
                    return Err(OptimizeError::DegenerateSimplex);
                }
            }
            sim = fresh;
            b = 0;
            continue;
        };
        // aim a small fraction of the reachable change inside each constraint so
        // rounding cannot leave the iterates marginally infeasible
        let cm: Vec<f64> = m
            .a
            .iter()
            .zip(&sim[b].c)
            .map(|(aj, cj)| cj + MARGIN * rho * aj.iter().map(|v| v.abs()).sum::<f64>())
            .collect();
        let d = subproblem(&m.g, &m.a, &cm, &sim[b].s, delta)?;
        let pred_f = -m.g.iter().zip(&d).map(|(g, x)| g * x).sum::<f64>();
        let v0: f64 = cm.iter().map(|c| c.max(0.0)).sum();
        let v1: f64 = m
            .a
            .iter()
            .zip(&cm)
            .map(|(aj, cj)| (cj + aj.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>()).max(0.0))
            .sum();
        if v0 - v1 > 0.0 && pred_f < 0.0 {
            let needed = 2.0 * (-pred_f) / (v0 - v1);
            if needed > mu {
                mu = needed;
                let nb = best_vertex(&sim, mu, b);
                if nb != b {
                    b = nb;
                    continue;
                }
            }
        }
        let pred = pred_f + mu * (v0 - v1);
        let dn = norm2(&d);
        let mut success = false;
        if dn >= 0.5 * rho && pred > 0.0 {
            let trial: Vec<f64> = sim[b].s.iter().zip(&d).map(|(s, x)| (s + x).clamp(0.0, 1.0)).collect();
            let ratio = match sp.eval(&trial)? {
                Some(v) => {
                    let ratio = (sim[b].merit(mu) - v.merit(mu)) / pred;
                    let step: Vec<f64> = v.s.iter().zip(&sim[b].s).map(|(x, y)| x - y).collect();
                    let (mut jbest, mut wbest) = (m.others[0], -1.0);
                    for (col, &i) in m.others.iter().enumerate() {
                        let w = m.inv.column(col).iter().zip(&step).map(|(a, c)| a * c).sum::<f64>().abs();
                        if w > wbest {
                            wbest = w;
                            jbest = i;
                        }
                    }
                    sim[jbest] = v;
                    ratio
                }
                None => -1.0,
            };
            delta = if ratio <= 0.1 {
                0.5 * delta
            } else if ratio <= 0.7 {
                (0.5 * delta).max(dn)
            } else {
                (0.5 * delta).max(2.0 * dn)
            };
            success = ratio > 0.1;
        } else {
            delta *= 0.1;
        }
        if delta <= 1.5 * rho {
            delta = rho;
        }
        if success {
            continue;
        }
        // geometry check on the simplex around the best vertex
        let b2 = best_vertex(&sim, mu, b);
        let Some(m) = build_models(&sim, b2) else {
            continue;
        };
        b = b2;
        let mut target: Option<(usize, usize)> = None;
        let mut worst_dist = 2.0 * delta;
        for (col, &i) in m.others.iter().enumerate() {
            let dist = norm2(&sim[i].s.iter().zip(&sim[b].s).map(|(x, y)| x - y).collect::<Vec<_>>());
            if dist > worst_dist {
                worst_dist = dist;
                target = Some((col, i));
            }
        }
        if target.is_none() {
            let mut min_h = 0.25 * delta;
            for (col, &i) in m.others.iter().enumerate() {
                let h = 1.0 / norm2(&m.inv.column(col).iter().copied().collect::<Vec<_>>());
                if h < min_h {
                    min_h = h;
                    target = Some((col, i));
                }
            }
        }
        if let Some((col, j)) = target {
            let w: Vec<f64> = m.inv.column(col).iter().copied().collect();
            let wn = norm2(&w);
            let dir: Vec<f64> = w.iter().map(|v| v / wn).collect();
            let slope = m.g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            let first_sign = if slope > 0.0 { -1.0 } else { 1.0 };
            let len = delta.max(rho);
            let mut replaced = false;
            for sg in [first_sign, -first_sign] {
                let cand: Vec<f64> = sim[b].s.iter().zip(&dir).map(|(s, d)| (s + sg * len * d).clamp(0.0, 1.0)).collect();
                // replacing vertex j scales the simplex volume by this factor
                let factor = cand.iter().zip(&sim[b].s).zip(&w).map(|((c, s), wv)| (c - s) * wv).sum::<f64>().abs();
                if factor < 0.1 {
                    continue;
                }
                if let Some(v) = sp.eval(&cand)? {
                    sim[j] = v;
                    replaced = true;
                    break;
                }
            }
            if replaced {
                continue;
            }
        } else if delta > rho {
            continue;
        }
        // the resolution is exhausted at this radius
        if rho <= cfg.rho_end {
            break;
        }
        let old = rho;
        rho = if 0.5 * rho <= 1.5 * cfg.rho_end { cfg.rho_end } else { 0.5 * rho };
        delta = (0.5 * old).max(rho);
    }
    let recs = &sp.ev.records()[first..];
    let k = best_index(recs).ok_or(OptimizeError::InvalidStart)?;
    Ok(recs[k].clone())
}
