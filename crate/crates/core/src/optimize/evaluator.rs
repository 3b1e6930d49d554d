use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OptimizeError, Problem};

/// Penalty charged for a design whose geometry is invalid.
pub const INVALID_PENALTY: f64 = 1e6;

/// Result of one problem evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    /// signed constraint values, satisfied when ≤ 0
    pub constraints: Vec<f64>,
    pub invalid: bool,
    pub aux: BTreeMap<String, f64>,
}

impl Evaluation {
    pub fn new(f: f64, constraints: Vec<f64>) -> Self {
        Evaluation {
            f,
            constraints,
            invalid: false,
            aux: BTreeMap::new(),
        }
    }

    /// Invalid design: objective `+∞`, constraints as far as they are known.
    pub fn invalid(constraints: Vec<f64>) -> Self {
        Evaluation {
            f: f64::INFINITY,
            constraints,
            invalid: true,
            aux: BTreeMap::new(),
        }
    }

    pub fn with_aux(mut self, key: &str, v: f64) -> Self {
        self.aux.insert(key.to_string(), v);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Global,
    Local,
    Final,
}

/// Floats that may be non-finite, stored as numbers or as "inf"/"-inf"/"nan".
mod num {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(super) fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::custom(format!("bad number '{s}'"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub stage: Stage,
    pub design: Vec<f64>,
    #[serde(with = "num")]
    pub f: f64,
    /// signed constraint values
    #[serde(with = "num::vec")]
    pub c: Vec<f64>,
    /// violations `max(0, c)` followed by the invalid-geometry indicator
    #[serde(with = "num::vec")]
    pub g: Vec<f64>,
    pub invalid: bool,
    #[serde(with = "num")]
    pub penalty: f64,
    pub aux: BTreeMap<String, f64>,
    /// seconds since the evaluator started
    pub elapsed: f64,
}

impl EvalRecord {
    pub fn feasible(&self) -> bool {
        !self.invalid && self.penalty == 0.0
    }

    /// Same evaluation apart from timing.
    pub fn same_result(&self, o: &EvalRecord) -> bool {
        let bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        self.index == o.index
            && self.stage == o.stage
            && bits(&self.design, &o.design)
            && self.f.to_bits() == o.f.to_bits()
            && bits(&self.c, &o.c)
            && self.invalid == o.invalid
            && self.penalty.to_bits() == o.penalty.to_bits()
    }

    pub fn evaluation(&self) -> Evaluation {
        Evaluation {
            f: self.f,
            constraints: self.c.clone(),
            invalid: self.invalid,
            aux: self.aux.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub dim: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

/// Reads a trace; an unparsable final line (interrupted write) is dropped.
pub fn read_trace(path: &Path) -> Result<(TraceHeader, Vec<EvalRecord>), OptimizeError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let lines: Vec<String> = file.lines().collect::<Result<_, _>>()?;
    let mut it = lines.iter().filter(|l| !l.trim().is_empty());
    let head: HeaderLine = serde_json::from_str(it.next().ok_or_else(|| OptimizeError::Trace("empty trace".into()))?)
        .map_err(|e| OptimizeError::Trace(format!("bad header: {e}")))?;
    let body: Vec<&String> = it.collect();
    let mut records = Vec::with_capacity(body.len());
    for (k, line) in body.iter().enumerate() {
        match serde_json::from_str::<EvalRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if k + 1 == body.len() => break,
            Err(e) => return Err(OptimizeError::Trace(format!("record {}: {e}", k + 1))),
        }
    }
    Ok((head.header, records))
}

pub fn write_header(w: &mut dyn Write, h: &TraceHeader) -> Result<(), OptimizeError> {
    serde_json::to_writer(&mut *w, &HeaderLine { header: h.clone() })?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Counts evaluations, records them, streams them to a trace, and replays a
/// previous trace so an interrupted run resumes exactly.
pub struct Evaluator<'a> {
    problem: &'a dyn Problem,
    scales: Vec<f64>,
    records: Vec<EvalRecord>,
    replay: VecDeque<EvalRecord>,
    writer: Option<&'a mut (dyn Write + Send)>,
    start: Instant,
    stage: Stage,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a dyn Problem) -> Self {
        Evaluator {
            problem,
            scales: problem.penalty_scales(),
            records: Vec::new(),
            replay: VecDeque::new(),
            writer: None,
            start: Instant::now(),
            stage: Stage::Global,
        }
    }

    pub fn with_writer(mut self, w: &'a mut (dyn Write + Send)) -> Self {
        self.writer = Some(w);
        self
    }

    pub fn with_replay(mut self, records: Vec<EvalRecord>) -> Self {
        self.replay = records.into();
        self
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem
    }

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EvalRecord> {
        self.records
    }

    pub fn penalty(&self, e: &Evaluation) -> f64 {
        let mut p = 0.0;
        for (k, c) in e.constraints.iter().enumerate() {
            if *c > 0.0 {
                p += self.scales.get(k).copied().unwrap_or(1.0) * c;
            }
        }
        if e.invalid {
            p += INVALID_PENALTY;
        }
        p
    }

    fn check_bounds(&self, x: &[f64]) -> Result<(), OptimizeError> {
        let (lo, hi) = (self.problem.lower(), self.problem.upper());
        if x.len() != lo.len() || x.iter().zip(lo).zip(hi).any(|((v, l), h)| !(v >= l && v <= h)) {
            return Err(OptimizeError::Trace("design outside the bounds".into()));
        }
        Ok(())
    }

    fn make_record(&self, index: usize, x: &[f64], e: Evaluation) -> EvalRecord {
        let mut g: Vec<f64> = e.constraints.iter().map(|c| if *c > 0.0 { *c } else { 0.0 }).collect();
        g.push(if e.invalid { 1.0 } else { 0.0 });
        EvalRecord {
            index,
            stage: self.stage,
            design: x.to_vec(),
            f: e.f,
            penalty: self.penalty(&e),
            c: e.constraints,
            g,
            invalid: e.invalid,
            aux: e.aux,
            elapsed: self.start.elapsed().as_secs_f64(),
        }
    }

    fn take_replay(&mut self, x: &[f64]) -> Option<EvalRecord> {
        let r = self.replay.front()?;
        let same = r.stage == self.stage
            && r.index == self.records.len()
            && r.design.len() == x.len()
            && r.design.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits());
        if same {
            self.replay.pop_front()
        } else {
            self.replay.clear();
            None
        }
    }

    fn push(&mut self, r: EvalRecord) -> Result<EvalRecord, OptimizeError> {
        if let Some(w) = self.writer.as_mut() {
            serde_json::to_writer(&mut **w, &r)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.records.push(r.clone());
        Ok(r)
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<EvalRecord, OptimizeError> {
        self.check_bounds(x)?;
        if let Some(r) = self.take_replay(x) {
            return self.push(r);
        }
        let e = self.problem.evaluate(x);
        let r = self.make_record(self.records.len(), x, e);
        self.push(r)
    }

    /// Records an evaluation computed by `eval` instead of the problem, for
    /// re-evaluations under different settings. Replayed like any other record.
    pub fn evaluate_with(&mut self, x: &[f64], eval: impl FnOnce(&[f64]) -> Evaluation) -> Result<EvalRecord, OptimizeError> {
        self.check_bounds(x)?;
        if let Some(r) = self.take_replay(x) {
            return self.push(r);
        }
        let e = eval(x);
        let r = self.make_record(self.records.len(), x, e);
        self.push(r)
    }

    /// Evaluates independent designs concurrently; records keep the input order.
    pub fn evaluate_batch(&mut self, xs: &[Vec<f64>]) -> Result<Vec<EvalRecord>, OptimizeError> {
        for x in xs {
            self.check_bounds(x)?;
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut k = 0;
        while k < xs.len() {
            match self.take_replay(&xs[k]) {
                Some(r) => {
                    out.push(self.push(r)?);
                    k += 1;
                }
                None => break,
            }
        }
        let problem = self.problem;
        let evals: Vec<Evaluation> = xs[k..].par_iter().map(|x| problem.evaluate(x)).collect();
        for (x, e) in xs[k..].iter().zip(evals) {
            let r = self.make_record(self.records.len(), x, e);
            out.push(self.push(r)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::test_problems::Sphere;

    #[test]
    fn records_round_trip_through_json_with_infinities() {
        let r = EvalRecord {
            index: 3,
            stage: Stage::Local,
            design: vec![0.1, -0.2],
            f: f64::INFINITY,
            c: vec![f64::NAN, -1.0],
            g: vec![0.0, 0.0, 1.0],
            invalid: true,
            penalty: 1e6,
            aux: BTreeMap::from([("volume".to_string(), 6.3e-4)]),
            elapsed: 0.5,
        };
        let s = serde_json::to_string(&r).unwrap();
        let back: EvalRecord = serde_json::from_str(&s).unwrap();
        assert!(back.same_result(&r));
        assert!(back.c[0].is_nan());
    }

    #[test]
    fn replay_reproduces_and_trace_reads_back() {
        let p = Sphere::new(2);
        let mut buf: Vec<u8> = Vec::new();
        write_header(
            &mut buf,
            &TraceHeader {
                version: 1,
                seed: 9,
                config_hash: "h".into(),
                dim: 2,
            },
        )
        .unwrap();
        let xs = vec![vec![0.5, 0.5], vec![0.1, -0.3], vec![1.0, 1.0]];
        {
            let mut ev = Evaluator::new(&p).with_writer(&mut buf);
            ev.evaluate_batch(&xs).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        std::fs::write(&path, &buf).unwrap();
        let (h, recs) = read_trace(&path).unwrap();
        assert_eq!(h.seed, 9);
        assert_eq!(recs.len(), 3);
        let mut ev = Evaluator::new(&p).with_replay(recs[..2].to_vec());
        let again = ev.evaluate_batch(&xs).unwrap();
        for (a, b) in again.iter().zip(&recs) {
            assert!(a.same_result(b));
        }
        assert_eq!(again[0].elapsed, recs[0].elapsed);
        assert!(ev.evaluate(&[2.0, 0.0]).is_err());
    }

    #[test]
    fn external_evaluations_are_recorded_and_replayed() {
        let p = Sphere::new(2);
        let mut ev = Evaluator::new(&p);
        ev.set_stage(Stage::Final);
        let r = ev.evaluate_with(&[0.5, 0.5], |_| Evaluation::new(7.0, vec![-1.0])).unwrap();
        assert_eq!((r.f, r.stage, r.index), (7.0, Stage::Final, 0));
        let recs = ev.into_records();
        let mut again = Evaluator::new(&p).with_replay(recs.clone());
        again.set_stage(Stage::Final);
        let b = again.evaluate_with(&[0.5, 0.5], |_| unreachable!("replayed")).unwrap();
        assert!(b.same_result(&recs[0]));
    }
}
