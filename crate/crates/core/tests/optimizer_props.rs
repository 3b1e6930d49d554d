use gunopt_core::optimize::{
    best_index, isres_minimize, local_minimize, Evaluation, Evaluator, IsresConfig, LocalConfig, Problem,
};
use proptest::prelude::*;

/// Shifted sphere with one linear constraint `1 - Σx ≤ 0`.
struct ConstrainedSphere {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConstrainedSphere {
    fn new(n: usize) -> Self {
        ConstrainedSphere {
            lower: vec![-2.0; n],
            upper: vec![3.0; n],
        }
    }
}

impl Problem for ConstrainedSphere {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let f = x.iter().map(|v| (v + 0.5) * (v + 0.5)).sum();
        Evaluation::new(f, vec![1.0 - x.iter().sum::<f64>()])
    }
}

fn inside(p: &ConstrainedSphere, x: &[f64]) -> bool {
    x.iter().zip(p.lower.iter().zip(&p.upper)).all(|(v, (lo, hi))| v >= lo && v <= hi)
}

fn best_is_monotone(ev: &Evaluator) -> bool {
    let recs = ev.records();
    let mut last: Option<(bool, f64)> = None;
    for n in 1..=recs.len() {
        let b = &recs[best_index(&recs[..n]).unwrap()];
        let now = (b.feasible(), if b.feasible() { b.f } else { b.penalty });
        if let Some((feas, v)) = last {
            let worse = (feas && !now.0) || (feas == now.0 && now.1 > v);
            if worse {
                return false;
            }
        }
        last = Some(now);
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn isres_stays_in_the_box_and_never_loses_its_best(seed: u64, n in 2usize..=5) {
        let p = ConstrainedSphere::new(n);
        let mut ev = Evaluator::new(&p);
        let cfg = IsresConfig { max_evals: 600, seed, ..IsresConfig::default() };
        isres_minimize(&mut ev, None, &cfg).unwrap();
        prop_assert!(ev.records().iter().all(|r| inside(&p, &r.design)));
        prop_assert!(best_is_monotone(&ev));
    }

    #[test]
    fn local_stays_in_the_box_and_never_loses_its_best(start in prop::collection::vec(-2.0f64..=3.0, 3)) {
        let p = ConstrainedSphere::new(3);
        let mut ev = Evaluator::new(&p);
        let cfg = LocalConfig { max_evals: 300, ..LocalConfig::default() };
        local_minimize(&mut ev, &start, &cfg).unwrap();
        prop_assert!(ev.records().iter().all(|r| inside(&p, &r.design)));
        prop_assert!(best_is_monotone(&ev));
    }
}
