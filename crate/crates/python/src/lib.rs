//! Python module `nulsched`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ::nulsched::engine::{self, Event};
use ::nulsched::report::{self, SweepAxis, TraceFormat, CORE_SWEEP, TASK_SWEEP};
use ::nulsched::workload::{self, GenParams, WorkloadError};
use ::nulsched::{fixture, metrics, CoreId, Platform, PolicyId, SimConfig, TaskId, TaskSet};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn workload_err(e: WorkloadError) -> PyErr {
    match e {
        WorkloadError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

/// One aperiodic task. Times are integer ticks.
#[pyclass(name = "Task", module = "nulsched", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyTask(::nulsched::Task);

#[pymethods]
impl PyTask {
    #[new]
    #[pyo3(signature = (id, arrival, exec, dline, quant, ctot, cur=None))]
    fn new(id: TaskId, arrival: u64, exec: u64, dline: u64, quant: u64, ctot: u64, cur: Option<u64>) -> Self {
        let t = ::nulsched::Task::new(id, arrival, exec, dline, quant, ctot);
        PyTask(match cur {
            Some(c) => t.with_cur(c),
            None => t,
        })
    }

    #[getter]
    fn id(&self) -> TaskId {
        self.0.id
    }
    #[getter]
    fn arrival(&self) -> u64 {
        self.0.arrival
    }
    #[getter]
    fn exec(&self) -> u64 {
        self.0.exec
    }
    #[getter]
    fn dline(&self) -> u64 {
        self.0.dline
    }
    #[getter]
    fn quant(&self) -> u64 {
        self.0.quant
    }
    #[getter]
    fn ctot(&self) -> u64 {
        self.0.ctot
    }
    #[getter]
    fn cur(&self) -> u64 {
        self.0.cur
    }

    fn __repr__(&self) -> String {
        let t = &self.0;
        format!(
            "Task(id={}, arrival={}, exec={}, dline={}, quant={}, ctot={}, cur={})",
            t.id, t.arrival, t.exec, t.dline, t.quant, t.ctot, t.cur
        )
    }
}

fn task_set(tasks: Vec<PyTask>) -> TaskSet {
    tasks.into_iter().map(|t| t.0).collect()
}

fn task_list(ts: TaskSet) -> Vec<PyTask> {
    ts.into_inner().into_iter().map(PyTask).collect()
}

/// Outcome of one simulation.
#[pyclass(name = "SimResult", module = "nulsched", frozen)]
struct PySimResult(engine::SimResult);

type EventTuple = (u64, &'static str, TaskId, Option<CoreId>, Option<f64>, Option<&'static str>);

fn event_tuple(e: &Event) -> EventTuple {
    (e.time, e.kind.as_str(), e.task_id, e.core, e.nlax_at_event, e.reason.map(|r| r.as_str()))
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn policy(&self) -> &'static str {
        self.0.policy.as_str()
    }
    #[getter]
    fn cores(&self) -> usize {
        self.0.cores
    }
    #[getter]
    fn scheduled_count(&self) -> usize {
        self.0.scheduled_count
    }
    #[getter]
    fn missed_count(&self) -> usize {
        self.0.missed_count
    }
    #[getter]
    fn per_core_util(&self) -> Vec<f64> {
        self.0.per_core_util.clone()
    }
    #[getter]
    fn avg_util(&self) -> f64 {
        self.0.avg_util
    }
    #[getter]
    fn u1(&self) -> f64 {
        self.0.u1
    }

    /// Trace as `(time, kind, task_id, core, nlax, reason)` tuples.
    fn events(&self) -> Vec<EventTuple> {
        self.0.trace.iter().map(event_tuple).collect()
    }

    /// Execution intervals as `(core, task_id, start, end)`, end exclusive.
    fn gantt(&self) -> Vec<(CoreId, TaskId, u64, u64)> {
        report::gantt_intervals(&self.0).into_iter().map(|g| (g.core, g.task_id, g.start, g.end)).collect()
    }

    /// Trace as comma-separated text; `format` is "events" or "gantt".
    #[pyo3(signature = (format="events"))]
    fn export(&self, format: &str) -> PyResult<String> {
        let f = match format {
            "events" => TraceFormat::Events,
            "gantt" => TraceFormat::Gantt,
            other => return Err(value_err(format!("unknown format `{other}`"))),
        };
        Ok(report::export_trace(&self.0, f))
    }

    fn __repr__(&self) -> String {
        format!(
            "SimResult(policy='{}', cores={}, scheduled={}, missed={}, avg_util={:.4})",
            self.0.policy, self.0.cores, self.0.scheduled_count, self.0.missed_count, self.0.avg_util
        )
    }
}

#[pyfunction]
fn laxity(dline: u64, now: u64, remaining: u64) -> f64 {
    metrics::laxity(dline, now, remaining)
}

#[pyfunction]
fn weight(quant: u64, total: u64, ctot: u64) -> PyResult<f64> {
    metrics::weight(quant, total, ctot).map_err(value_err)
}

#[pyfunction]
fn non_uniform_laxity(lax: f64, weight: f64) -> PyResult<f64> {
    metrics::non_uniform_laxity(lax, weight).map_err(value_err)
}

#[pyfunction]
fn utilisation(exec: u64, dline: u64) -> PyResult<f64> {
    metrics::utilisation(exec, dline).map_err(value_err)
}

#[pyfunction]
fn modification_factor(u_max: f64) -> f64 {
    metrics::modification_factor(u_max)
}

#[pyfunction]
#[pyo3(signature = (z, exact_euler=false))]
fn schedulability_bound(z: usize, exact_euler: bool) -> PyResult<f64> {
    let e = if exact_euler { std::f64::consts::E } else { metrics::EULER_TRUNCATED };
    metrics::schedulability_bound_with(z, e).map_err(value_err)
}

#[pyfunction]
fn two_core_bound(z: usize) -> f64 {
    metrics::two_core_bound(z)
}

#[pyfunction]
fn round2(x: f64) -> f64 {
    metrics::round2(x)
}

/// The six-task worked example.
#[pyfunction]
fn worked_example() -> Vec<PyTask> {
    task_list(fixture::worked_example())
}

#[pyfunction]
fn example_pins() -> BTreeMap<TaskId, CoreId> {
    fixture::example_pins()
}

/// Report text and the list of golden values that were not reproduced.
#[pyfunction]
fn example_report() -> PyResult<(String, Vec<String>)> {
    let r = report::example_report().map_err(value_err)?;
    Ok((r.text, r.deviations))
}

/// Simulates `policy` ("edf" or "nul-edf") over `tasks` on `cores` cores.
#[pyfunction]
#[pyo3(signature = (policy, tasks, cores, pins=None, max_time=None, exact_euler=false))]
fn run(
    py: Python<'_>,
    policy: &str,
    tasks: Vec<PyTask>,
    cores: usize,
    pins: Option<BTreeMap<TaskId, CoreId>>,
    max_time: Option<u64>,
    exact_euler: bool,
) -> PyResult<PySimResult> {
    let policy: PolicyId = policy.parse().map_err(PyValueError::new_err)?;
    let ts = task_set(tasks);
    let platform = Platform::with_pins(cores, pins.unwrap_or_default());
    let mut cfg = SimConfig::for_task_set(&ts);
    if let Some(t) = max_time {
        cfg.max_time = t;
    }
    cfg.exact_euler = exact_euler;
    let r = py.detach(|| engine::run(policy, &ts, &platform, &cfg)).map_err(value_err)?;
    Ok(PySimResult(r))
}

fn params(params_json: Option<&str>, n: Option<usize>, seed: Option<u64>) -> PyResult<GenParams> {
    let mut p = match params_json {
        Some(s) => workload::parse_gen_params(s).map_err(workload_err)?,
        None => GenParams::default(),
    };
    if let Some(n) = n {
        p.n = n;
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    Ok(p)
}

/// Seeded random task set. `params_json` overrides the bundled defaults.
#[pyfunction]
#[pyo3(signature = (n=None, seed=None, params_json=None))]
fn generate(n: Option<usize>, seed: Option<u64>, params_json: Option<&str>) -> PyResult<Vec<PyTask>> {
    let p = params(params_json, n, seed)?;
    workload::generate(&p).map(task_list).map_err(workload_err)
}

#[pyfunction]
fn save_task_set(tasks: Vec<PyTask>, path: &str) -> PyResult<()> {
    workload::save(&task_set(tasks), path).map_err(workload_err)
}

#[pyfunction]
fn load_task_set(path: &str) -> PyResult<Vec<PyTask>> {
    workload::load(path).map(task_list).map_err(workload_err)
}

/// Comparison report as comma-separated text. `axis` is "tasks" or "cores".
#[pyfunction]
#[pyo3(signature = (axis="tasks", sweep=None, cores=4, tasks=None, seed=None))]
fn compare(
    py: Python<'_>,
    axis: &str,
    sweep: Option<Vec<usize>>,
    cores: usize,
    tasks: Option<usize>,
    seed: Option<u64>,
) -> PyResult<String> {
    let (axis, default_sweep): (SweepAxis, &[usize]) = match axis {
        "tasks" => (SweepAxis::Tasks, &TASK_SWEEP),
        "cores" => (SweepAxis::Cores, &CORE_SWEEP),
        other => return Err(value_err(format!("unknown axis `{other}`"))),
    };
    let sweep = sweep.unwrap_or_else(|| default_sweep.to_vec());
    let p = params(None, tasks, seed)?;
    let c = py
        .detach(|| report::compare(axis, &sweep, &p, &Platform::new(cores), &SimConfig::new(0)))
        .map_err(value_err)?;
    Ok(report::render_comparison(&c))
}

#[pymodule]
#[pyo3(name = "nulsched")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTask>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(laxity, m)?)?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(non_uniform_laxity, m)?)?;
    m.add_function(wrap_pyfunction!(utilisation, m)?)?;
    m.add_function(wrap_pyfunction!(modification_factor, m)?)?;
    m.add_function(wrap_pyfunction!(schedulability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(two_core_bound, m)?)?;
    m.add_function(wrap_pyfunction!(round2, m)?)?;
    m.add_function(wrap_pyfunction!(worked_example, m)?)?;
    m.add_function(wrap_pyfunction!(example_pins, m)?)?;
    m.add_function(wrap_pyfunction!(example_report, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(save_task_set, m)?)?;
    m.add_function(wrap_pyfunction!(load_task_set, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use pyo3::types::PyDict;

    use super::*;

    #[test]
    fn module_runs_the_worked_example() {
        Python::initialize();
        Python::attach(|py| {
            let m = pyo3::wrap_pymodule!(init_module)(py);
            let globals = PyDict::new(py);
            globals.set_item("ns", m).unwrap();
            py.run(
                c"r = ns.run('nul-edf', ns.worked_example(), 4, pins=ns.example_pins())
assert (r.scheduled_count, r.missed_count) == (6, 0)
assert ns.example_report()[1] == []
assert abs(ns.schedulability_bound(4) - 2.528) < 1e-3
try:
    ns.weight(1, 0, 1)
    raise AssertionError('zero denominator accepted')
except ValueError:
    pass
",
                Some(&globals),
                None,
            )
            .unwrap();
        });
    }
}
