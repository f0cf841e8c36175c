//! Seeded task-set generation and task-set files.
//!
//! # Generator
//!
//! The pseudorandom source is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Samples are derived from raw `next_u64` outputs so
//! the sequence does not depend on `rand`'s distribution code:
//!
//! * `unit = (next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`;
//! * integer in `[lo, hi]`: `lo + floor(unit * (hi - lo + 1))`;
//! * real in `[lo, hi]`: `lo + unit * (hi - lo)`.
//!
//! For each of the `n` tasks, in order, the generator draws arrival
//! (integer in `[0, arrival_span]`), exec, slack factor, quantum fraction
//! and ctot. Then `dline = arrival + ceil(exec * factor)` and
//! `quant = ceil(fraction * exec)`. Tasks are sorted by arrival (draw order
//! breaks ties) and numbered `1..=n`.
//!
//! # Files
//!
//! Task sets are comma-separated text with the header
//! `id,arrival,exec,dline,quant,ctot,cur` and one decimal-integer record per
//! task. [`save_with_metadata`] also writes `<file>.meta.json` holding the
//! generator parameters. Pin files use the header `task_id,core`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, CoreId, Platform, Task, TaskId, TaskSet, Ticks, Violation};

pub const TASK_SET_HEADER: [&str; 7] = ["id", "arrival", "exec", "dline", "quant", "ctot", "cur"];

const DEFAULT_PARAMS_JSON: &str = include_str!("../config/default_gen.json");

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("parse error at record {record}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse { record: u64, line: Option<u64>, message: String },
    #[error("invalid task set: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Distribution parameters for [`generate`]. All ranges are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub arrival_span: Ticks,
    pub exec_range: (Ticks, Ticks),
    /// Deadline = arrival + exec * factor; factors must exceed 1.
    pub slack_factor_range: (f64, f64),
    /// quant = ceil(fraction * exec); normally within (0, 1].
    pub quant_fraction_range: (f64, f64),
    pub ctot_range: (Ticks, Ticks),
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PARAMS_JSON).expect("bundled generator defaults parse")
    }
}

impl GenParams {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::InvalidParams(m.to_string()));
        let (elo, ehi) = self.exec_range;
        let (slo, shi) = self.slack_factor_range;
        let (qlo, qhi) = self.quant_fraction_range;
        let (clo, chi) = self.ctot_range;
        if elo == 0 || elo > ehi {
            return bad("exec_range must satisfy 1 <= min <= max");
        }
        if !(slo > 1.0 && slo <= shi && shi.is_finite()) {
            return bad("slack_factor_range must satisfy 1 < min <= max");
        }
        // fractions above 1 are tolerated; the quantum is clamped and reported
        if !(qlo > 0.0 && qlo <= qhi && qhi.is_finite()) {
            return bad("quant_fraction_range must satisfy 0 < min <= max");
        }
        if clo == 0 || clo > chi {
            return bad("ctot_range must satisfy 1 <= min <= max");
        }
        Ok(())
    }
}

/// Tasks whose quantum had to be clamped down to their exec time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenReport {
    pub clamped: Vec<TaskId>,
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn int(&mut self, lo: u64, hi: u64) -> u64 {
        let span = (hi - lo + 1) as f64;
        (lo + (self.unit() * span) as u64).min(hi)
    }

    fn real(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }
}

pub fn generate(params: &GenParams) -> Result<TaskSet, WorkloadError> {
    generate_with_report(params).map(|(ts, _)| ts)
}

pub fn generate_with_report(params: &GenParams) -> Result<(TaskSet, GenReport), WorkloadError> {
    params.check()?;
    let mut rng = Sampler(ChaCha8Rng::seed_from_u64(params.seed));
    let mut drawn = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let arrival = rng.int(0, params.arrival_span);
        let exec = rng.int(params.exec_range.0, params.exec_range.1);
        let factor = rng.real(params.slack_factor_range.0, params.slack_factor_range.1);
        let fraction = rng.real(params.quant_fraction_range.0, params.quant_fraction_range.1);
        let ctot = rng.int(params.ctot_range.0, params.ctot_range.1);
        drawn.push((arrival, exec, factor, fraction, ctot));
    }
    // stable: equal arrivals keep draw order
    drawn.sort_by_key(|d| d.0);
    let mut report = GenReport::default();
    let tasks = drawn
        .into_iter()
        .enumerate()
        .map(|(i, (arrival, exec, factor, fraction, ctot))| {
            let id = i as TaskId + 1;
            let rel = ((exec as f64 * factor).ceil() as Ticks).max(exec + 1);
            let mut quant = ((fraction * exec as f64).ceil() as Ticks).max(1);
            if quant > exec {
                quant = exec;
                report.clamped.push(id);
            }
            Task::new(id, arrival, exec, arrival + rel, quant, ctot)
        })
        .collect();
    Ok((tasks, report))
}

fn structural_violations(ts: &TaskSet) -> Vec<Violation> {
    validate(ts, &Platform::new(1))
}

pub fn write_task_set<W: Write>(ts: &TaskSet, out: W) -> Result<(), WorkloadError> {
    let v = structural_violations(ts);
    if !v.is_empty() {
        return Err(WorkloadError::Validation(v));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TASK_SET_HEADER)?;
    for t in ts {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_task_set<R: Read>(input: R) -> Result<TaskSet, WorkloadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut tasks = Vec::new();
    for (i, rec) in r.deserialize::<Task>().enumerate() {
        let task = rec.map_err(|e| WorkloadError::Parse {
            record: i as u64 + 1,
            line: e.position().map(|p| p.line()),
            message: e.to_string(),
        })?;
        tasks.push(task);
    }
    let ts = TaskSet::new(tasks);
    let v = structural_violations(&ts);
    if !v.is_empty() {
        return Err(WorkloadError::Validation(v));
    }
    Ok(ts)
}

pub fn save(ts: &TaskSet, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    write_task_set(ts, File::create(path)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<TaskSet, WorkloadError> {
    read_task_set(File::open(path)?)
}

pub fn metadata_path(path: impl AsRef<Path>) -> PathBuf {
    let mut p = path.as_ref().as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

/// Saves the task set plus a sibling `<file>.meta.json` recording `params`.
pub fn save_with_metadata(ts: &TaskSet, path: impl AsRef<Path>, params: &GenParams) -> Result<(), WorkloadError> {
    save(ts, path.as_ref())?;
    let meta = File::create(metadata_path(path))?;
    serde_json::to_writer_pretty(meta, params)?;
    Ok(())
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<GenParams, WorkloadError> {
    Ok(serde_json::from_reader(File::open(metadata_path(path))?)?)
}

/// Generator parameters from JSON text, checked.
pub fn parse_gen_params(json: &str) -> Result<GenParams, WorkloadError> {
    let p: GenParams = serde_json::from_str(json)?;
    p.check()?;
    Ok(p)
}

pub fn load_gen_params(path: impl AsRef<Path>) -> Result<GenParams, WorkloadError> {
    parse_gen_params(&std::fs::read_to_string(path)?)
}

#[derive(Deserialize)]
struct PinRecord {
    task_id: TaskId,
    core: CoreId,
}

pub fn read_pins<R: Read>(input: R) -> Result<BTreeMap<TaskId, CoreId>, WorkloadError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut pins = BTreeMap::new();
    for (i, rec) in r.deserialize::<PinRecord>().enumerate() {
        let rec = rec.map_err(|e| WorkloadError::Parse {
            record: i as u64 + 1,
            line: e.position().map(|p| p.line()),
            message: e.to_string(),
        })?;
        pins.insert(rec.task_id, rec.core);
    }
    Ok(pins)
}

pub fn load_pins(path: impl AsRef<Path>) -> Result<BTreeMap<TaskId, CoreId>, WorkloadError> {
    read_pins(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn round_trip(ts: &TaskSet) -> TaskSet {
        let mut buf = Vec::new();
        write_task_set(ts, &mut buf).unwrap();
        read_task_set(buf.as_slice()).unwrap()
    }

    #[test]
    fn worked_example_round_trips() {
        let ts = fixture::worked_example();
        assert_eq!(round_trip(&ts), ts);
    }

    #[test]
    fn empty_round_trips() {
        let mut buf = Vec::new();
        write_task_set(&TaskSet::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "id,arrival,exec,dline,quant,ctot,cur\n");
        assert!(read_task_set(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn missing_deadline_is_a_parse_error() {
        let text = "id,arrival,exec,quant,ctot,cur\n1,0,80,10,7,0\n";
        match read_task_set(text.as_bytes()) {
            Err(WorkloadError::Parse { record, message, .. }) => {
                assert_eq!(record, 1);
                assert!(message.contains("dline"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "id,arrival,exec,dline,quant,ctot,cur\n1,0,80,125,10,7,0\n2,0,x,140,15,6,0\n";
        assert!(matches!(read_task_set(text.as_bytes()), Err(WorkloadError::Parse { record: 2, line: Some(3), .. })));
    }

    #[test]
    fn duplicate_ids_fail_validation() {
        let text = "id,arrival,exec,dline,quant,ctot,cur\n1,0,80,125,10,7,0\n1,0,100,140,15,6,0\n";
        assert!(matches!(
            read_task_set(text.as_bytes()),
            Err(WorkloadError::Validation(v)) if v == vec![Violation::DuplicateId(1)]
        ));
    }

    #[test]
    fn saving_an_invalid_set_fails() {
        let ts = TaskSet::new(vec![Task::new(1, 0, 5, 10, 6, 1)]);
        assert!(matches!(write_task_set(&ts, Vec::new()), Err(WorkloadError::Validation(_))));
    }

    #[test]
    fn empty_generation() {
        let ts = generate(&GenParams::default().with_n(0)).unwrap();
        assert!(ts.is_empty());
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let p = GenParams::default().with_n(300).with_seed(99);
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a, b);
        assert!(structural_violations(&a).is_empty());
        let ids: Vec<_> = a.iter().map(|t| t.id).collect();
        assert_eq!(ids, (1..=300).collect::<Vec<_>>());
        assert!(a.tasks().windows(2).all(|w| w[0].arrival <= w[1].arrival));
        assert!(a.iter().all(|t| t.dline > t.arrival + t.exec));
        assert_ne!(a, generate(&p.with_seed(100)).unwrap());
    }

    #[test]
    fn quantum_clamping_is_reported() {
        let p = GenParams {
            n: 20,
            arrival_span: 10,
            exec_range: (1, 1),
            slack_factor_range: (1.5, 2.0),
            quant_fraction_range: (1.0, 1.0),
            ctot_range: (1, 1),
            seed: 3,
        };
        let (ts, report) = generate_with_report(&p).unwrap();
        assert!(report.clamped.is_empty());
        assert!(ts.iter().all(|t| t.quant == 1));

        let p = GenParams { exec_range: (4, 9), quant_fraction_range: (1.5, 2.0), ..p };
        let (ts, report) = generate_with_report(&p).unwrap();
        assert_eq!(report.clamped, (1..=20).collect::<Vec<_>>());
        assert!(ts.iter().all(|t| t.quant == t.exec));
    }

    #[test]
    fn bad_params_are_refused() {
        let p = GenParams { slack_factor_range: (1.0, 2.0), ..Default::default() };
        assert!(matches!(generate(&p), Err(WorkloadError::InvalidParams(_))));
        let p = GenParams { exec_range: (10, 5), ..Default::default() };
        assert!(generate(&p).is_err());
        let p = GenParams { quant_fraction_range: (0.0, 0.5), ..Default::default() };
        assert!(generate(&p).is_err());
    }

    #[test]
    fn metadata_sits_next_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        let p = GenParams::default().with_n(5);
        let ts = generate(&p).unwrap();
        save_with_metadata(&ts, &path, &p).unwrap();
        assert_eq!(load(&path).unwrap(), ts);
        assert_eq!(load_metadata(&path).unwrap(), p);
        assert!(dir.path().join("set.csv.meta.json").exists());
    }

    #[test]
    fn pins_parse() {
        let pins = read_pins("task_id,core\n1,1\n4,1\n2,2\n".as_bytes()).unwrap();
        assert_eq!(pins.len(), 3);
        assert_eq!(pins[&4], 1);
    }
}
