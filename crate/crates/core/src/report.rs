//! Comparison sweeps, trace export and the worked-example report.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, EngineError, EventKind, SimResult};
use crate::fixture;
use crate::metrics::{self, round2};
use crate::model::{CoreId, Platform, SimConfig, TaskId, Ticks};
use crate::policies::PolicyId;
use crate::workload::{self, GenParams, WorkloadError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("sweep value {value}: {source}")]
    Sweep { value: usize, source: Box<ReportError> },
    #[error("sweep values must be positive and strictly ascending")]
    BadSweep,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

/// Which parameter a comparison varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Task count; improvement is measured on tasks scheduled.
    Tasks,
    /// Core count; improvement is measured on average utilisation.
    Cores,
}

/// Task counts of the schedulability tables.
pub const TASK_SWEEP: [usize; 17] = [8, 15, 20, 30, 45, 60, 75, 80, 90, 100, 200, 500, 700, 900, 1000, 2000, 5000];

/// Core counts of the utilisation tables.
pub const CORE_SWEEP: [usize; 23] =
    [4, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48, 52, 56, 60, 65, 70, 75, 80, 85, 90, 95, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Task count or core count, per the sweep axis.
    pub value: usize,
    pub n_tasks: usize,
    pub edf_scheduled: usize,
    pub edf_missed: usize,
    pub nul_scheduled: usize,
    pub nul_missed: usize,
    pub edf_util: f64,
    pub nul_util: f64,
    /// `None` when the EDF metric is zero.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub edf_scheduled: f64,
    pub edf_missed: f64,
    pub nul_scheduled: f64,
    pub nul_missed: f64,
    pub edf_util: f64,
    pub nul_util: f64,
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub axis: SweepAxis,
    pub rows: Vec<ComparisonRow>,
    pub average: AverageRow,
}

/// `(nul - edf) / edf * 100`, undefined when `edf` is zero.
pub fn improvement_pct(edf: f64, nul: f64) -> Option<f64> {
    (edf > 0.0).then(|| (nul - edf) / edf * 100.0)
}

/// Runs both policies on one generated task set per sweep value.
///
/// Sweep point `i` uses seed `params.seed + i`. `platform.cores` is the core
/// count for task sweeps and `params.n` the task count for core sweeps.
/// The horizon of each run is the later of `config.max_time` and the task
/// set's last deadline. Points run in parallel; rows come back in sweep order.
pub fn compare(
    axis: SweepAxis,
    sweep: &[usize],
    params: &GenParams,
    platform: &Platform,
    config: &SimConfig,
) -> Result<Comparison, ReportError> {
    if sweep.is_empty() || sweep[0] == 0 || sweep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReportError::BadSweep);
    }
    let rows = sweep
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            compare_point(axis, value, i as u64, params, platform, config)
                .map_err(|e| ReportError::Sweep { value, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let average = average_row(&rows);
    Ok(Comparison { axis, rows, average })
}

fn compare_point(
    axis: SweepAxis,
    value: usize,
    index: u64,
    params: &GenParams,
    platform: &Platform,
    config: &SimConfig,
) -> Result<ComparisonRow, ReportError> {
    let (n, cores) = match axis {
        SweepAxis::Tasks => (value, platform.cores),
        SweepAxis::Cores => (params.n, value),
    };
    let p = params.with_n(n).with_seed(params.seed.wrapping_add(index));
    let ts = workload::generate(&p)?;
    let platform = Platform::with_pins(cores, platform.pinned.clone());
    let cfg = SimConfig { max_time: config.max_time.max(ts.max_deadline()), ..*config };
    let edf = engine::run(PolicyId::Edf, &ts, &platform, &cfg)?;
    let nul = engine::run(PolicyId::NulEdf, &ts, &platform, &cfg)?;
    let improvement = match axis {
        SweepAxis::Tasks => improvement_pct(edf.scheduled_count as f64, nul.scheduled_count as f64),
        SweepAxis::Cores => improvement_pct(edf.avg_util, nul.avg_util),
    };
    Ok(ComparisonRow {
        value,
        n_tasks: n,
        edf_scheduled: edf.scheduled_count,
        edf_missed: edf.missed_count,
        nul_scheduled: nul.scheduled_count,
        nul_missed: nul.missed_count,
        edf_util: edf.avg_util,
        nul_util: nul.avg_util,
        improvement_pct: improvement,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn average_row(rows: &[ComparisonRow]) -> AverageRow {
    let col = |f: fn(&ComparisonRow) -> f64| mean(rows.iter().map(f));
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.improvement_pct).collect();
    AverageRow {
        edf_scheduled: col(|r| r.edf_scheduled as f64),
        edf_missed: col(|r| r.edf_missed as f64),
        nul_scheduled: col(|r| r.nul_scheduled as f64),
        nul_missed: col(|r| r.nul_missed as f64),
        edf_util: col(|r| r.edf_util),
        nul_util: col(|r| r.nul_util),
        improvement_pct: (!defined.is_empty()).then(|| mean(defined.into_iter())),
    }
}

fn pct_cell(p: Option<f64>) -> (String, String) {
    match p {
        Some(v) => (format!("{}", v.round() as i64), format!("{v:.4}")),
        None => ("NA".into(), "NA".into()),
    }
}

/// Comparison as comma-separated text with a trailing `Average` row.
pub fn render_comparison(c: &Comparison) -> String {
    let axis = match c.axis {
        SweepAxis::Tasks => "n_tasks",
        SweepAxis::Cores => "n_cores",
    };
    let mut out = format!(
        "{axis},edf_scheduled,edf_missed,nul_scheduled,nul_missed,edf_util,nul_util,improvement_pct,improvement_raw\n"
    );
    for r in &c.rows {
        let (pct, raw) = pct_cell(r.improvement_pct);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.4},{:.4},{},{}",
            r.value, r.edf_scheduled, r.edf_missed, r.nul_scheduled, r.nul_missed, r.edf_util, r.nul_util, pct, raw
        );
    }
    let a = &c.average;
    let (pct, raw) = pct_cell(a.improvement_pct);
    let _ = writeln!(
        out,
        "Average,{:.2},{:.2},{:.2},{:.2},{:.4},{:.4},{},{}",
        a.edf_scheduled, a.edf_missed, a.nul_scheduled, a.nul_missed, a.edf_util, a.nul_util, pct, raw
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceFormat {
    Events,
    Gantt,
}

/// One contiguous stretch of execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttInterval {
    pub core: CoreId,
    pub task_id: TaskId,
    /// Inclusive.
    pub start: Ticks,
    /// Exclusive.
    pub end: Ticks,
}

/// Execution intervals per core, sorted by core then start. Back-to-back
/// quanta of the same task are merged.
pub fn gantt_intervals(result: &SimResult) -> Vec<GanttInterval> {
    let mut open: Vec<Option<(TaskId, Ticks)>> = vec![None; result.cores];
    let mut out: Vec<GanttInterval> = Vec::new();
    for ev in &result.trace {
        let Some(core) = ev.core else { continue };
        match ev.kind {
            EventKind::StartQuantum => open[core - 1] = Some((ev.task_id, ev.time)),
            EventKind::EndQuantum => {
                if let Some((task_id, start)) = open[core - 1].take() {
                    out.push(GanttInterval { core, task_id, start, end: ev.time });
                }
            }
            _ => {}
        }
    }
    out.sort_by_key(|g| (g.core, g.start));
    let mut merged: Vec<GanttInterval> = Vec::with_capacity(out.len());
    for g in out {
        match merged.last_mut() {
            Some(last) if last.core == g.core && last.task_id == g.task_id && last.end == g.start => last.end = g.end,
            _ => merged.push(g),
        }
    }
    merged
}

pub fn export_trace(result: &SimResult, format: TraceFormat) -> String {
    match format {
        TraceFormat::Events => {
            let mut out = String::from("time,kind,task_id,core,nlax,reason\n");
            for e in &result.trace {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    e.time,
                    e.kind.as_str(),
                    e.task_id,
                    e.core.map(|c| c.to_string()).unwrap_or_default(),
                    e.nlax_at_event.map(|x| format!("{x:.6}")).unwrap_or_default(),
                    e.reason.map(|r| r.as_str()).unwrap_or_default(),
                );
            }
            out
        }
        TraceFormat::Gantt => {
            let mut out = String::from("core,task_id,start,end\n");
            for g in gantt_intervals(result) {
                let _ = writeln!(out, "{},{},{},{}", g.core, g.task_id, g.start, g.end);
            }
            out
        }
    }
}

/// One-row-per-core summary of a run.
pub fn render_summary(result: &SimResult) -> String {
    let mut out = String::from("policy,core,util\n");
    for (i, u) in result.per_core_util.iter().enumerate() {
        let _ = writeln!(out, "{},{},{:.4}", result.policy, i + 1, u);
    }
    let _ = writeln!(out, "# scheduled={} missed={} avg_util={:.4}", result.scheduled_count, result.missed_count, result.avg_util);
    out
}

/// Output of the worked-example command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReport {
    pub text: String,
    /// Every golden value that was not reproduced; empty on success.
    pub deviations: Vec<String>,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.deviations.is_empty()
    }
}

const CELL_TOL: f64 = 0.005;

/// Recomputes the worked example and checks it against the reference values.
pub fn example_report() -> Result<ExampleReport, ReportError> {
    let ts = fixture::worked_example();
    let mut text = String::new();
    let mut dev = Vec::new();
    let mut check = |what: String, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            dev.push(format!("{what}: expected {want}, got {got}"));
        }
    };

    let _ = writeln!(text, "task,weight,laxity,nlax,u,u_norm");
    let mut u_max = f64::NEG_INFINITY;
    let mut snaps = Vec::new();
    for (task, golden) in ts.iter().zip(fixture::GOLDEN_ROWS.iter()) {
        debug_assert_eq!(task.id, golden.id);
        let s = metrics::snapshot(task, task.cur, task.exec, 1.0).map_err(EngineError::from)?;
        let cells = [
            ("weight", s.weight, golden.weight),
            ("laxity", s.lax, golden.lax),
            ("nlax", s.nlax, golden.nlax),
            ("u", s.u, golden.u),
            ("u_norm", s.u_norm, golden.u_norm),
        ];
        for (name, got, want) in cells {
            check(format!("T{} {name}", task.id), round2(got), want, CELL_TOL);
        }
        let _ = writeln!(
            text,
            "T{},{:.2},{:.2},{:.2},{:.2},{:.2}",
            task.id,
            round2(s.weight),
            round2(s.lax),
            round2(s.nlax),
            round2(s.u),
            round2(s.u_norm)
        );
        u_max = u_max.max(s.u_norm);
        snaps.push((task.id, s));
    }

    let u_max = round2(u_max);
    let factor = metrics::modification_factor(u_max);
    let l4 = metrics::schedulability_bound(fixture::EXAMPLE_CORES).map_err(EngineError::from)?;
    let two = metrics::two_core_bound(2);
    check("u_max".into(), u_max, fixture::GOLDEN_U_MAX, CELL_TOL);
    check("modification factor".into(), factor, fixture::GOLDEN_FACTOR, 1e-9);
    check("L(4)".into(), l4, fixture::GOLDEN_BOUND_4, 1e-3);
    check("two-core bound (z=2)".into(), two, 1.5, 0.0);
    let _ = writeln!(text);
    let _ = writeln!(text, "u_max = {u_max:.2}");
    let _ = writeln!(text, "modification factor U1 = 1.5 + |{u_max:.2} - 0.5| = {factor:.2}");
    let _ = writeln!(text, "L(4) = 4 * (1 - 1/{}) = {l4:.3}", metrics::EULER_TRUNCATED);
    let _ = writeln!(text, "two-core bound (z=2) = {two:.1}");
    let _ = write!(text, "u2 = U1 * u:");
    for (id, s) in &snaps {
        let _ = write!(text, " T{id}={:.2}", round2(factor * round2(s.u)));
    }
    let _ = writeln!(text);

    let edf_avg = engine::mean_of_core_averages(&fixture::EDF_CORE_AVERAGES);
    let nul_avg = engine::mean_of_core_averages(&fixture::NUL_CORE_AVERAGES);
    check("EDF average utilisation".into(), round2(edf_avg), fixture::GOLDEN_EDF_AVG, CELL_TOL);
    check("NUL-EDF average utilisation".into(), round2(nul_avg), fixture::GOLDEN_NUL_AVG, CELL_TOL);
    let _ = writeln!(text);
    let _ = writeln!(text, "EDF per-core averages {:?} -> {:.2}", fixture::EDF_CORE_AVERAGES, round2(edf_avg));
    let _ = writeln!(text, "NUL-EDF per-core averages {:?} -> {:.2}", fixture::NUL_CORE_AVERAGES, round2(nul_avg));
    let _ = writeln!(
        text,
        "core 1 under NUL-EDF: {factor:.2} * (0.64 + 0.54) = {:.2}",
        round2(metrics::modified_utilisation(factor, 0.64 + 0.54))
    );

    let platform = fixture::example_platform();
    let cfg = SimConfig::for_task_set(&ts);
    let _ = writeln!(text);
    let _ = writeln!(text, "simulated, pinned placement:");
    for policy in PolicyId::ALL {
        let r = engine::run(policy, &ts, &platform, &cfg)?;
        let _ = writeln!(
            text,
            "  {policy}: scheduled={} missed={} avg_util={:.2}",
            r.scheduled_count, r.missed_count, r.avg_util
        );
    }

    if dev.is_empty() {
        let _ = writeln!(text, "\nall golden values reproduced");
    } else {
        let _ = writeln!(text, "\n{} golden value(s) deviate:", dev.len());
        for d in &dev {
            let _ = writeln!(text, "  {d}");
        }
    }
    Ok(ExampleReport { text, deviations: dev })
}
