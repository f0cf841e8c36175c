//! Tick-driven multicore simulator.
//!
//! One call to [`run`] drives a single policy over a task set and returns
//! the full event trace. Each tick proceeds in a fixed order:
//!
//! 1. release tasks arriving now and place them (admission for EDF,
//!    holding/execution classification for NUL-EDF);
//! 2. NUL-EDF only: discard execution-queue tasks whose non-uniform laxity
//!    went negative, then evaluate held tasks whose laxity reached zero and
//!    dispatch them to a free core, starting with their home core (or its
//!    successor when `u2 >= 2`) and probing round-robin;
//! 3. every idle core starts a quantum for the earliest-deadline task in its
//!    execution queue, and every busy core advances its current quantum;
//! 4. tasks still unfinished at their deadline are missed.
//!
//! Under NUL-EDF the modification factor is recomputed whenever new tasks
//! are released; each task's modified utilisation uses the factor current
//! at its release. Utilisations inside the engine use deadlines relative to
//! arrival.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsError};
use crate::model::{
    validate, CoreId, Platform, QueueKind, SimConfig, Task, TaskId, TaskSet, TaskState, TaskStatus,
    Ticks, Violation,
};
use crate::policies::{self, HoldingAction, Placement, PolicyId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid input: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("horizon {max_time} ends before the latest deadline {max_deadline}")]
    HorizonTooShort { max_time: Ticks, max_deadline: Ticks },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Release,
    AdmitHolding,
    AdmitExecution,
    StartQuantum,
    EndQuantum,
    Complete,
    Miss,
    Migrate,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::AdmitHolding => "admit_holding",
            EventKind::AdmitExecution => "admit_execution",
            EventKind::StartQuantum => "start_quantum",
            EventKind::EndQuantum => "end_quantum",
            EventKind::Complete => "complete",
            EventKind::Miss => "miss",
            EventKind::Migrate => "migrate",
        }
    }
}

/// Why a task was counted as missed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissReason {
    /// Refused at release (EDF admission, or the two-core bound).
    Rejected,
    /// Laxity went negative with `u2` at or below the core-count bound, or
    /// the deadline passed with work remaining.
    DeadlinePassed,
    /// Laxity went negative with `u2` above the core-count bound.
    BoundExceeded,
    /// Still live when the simulation horizon ran out.
    HorizonExceeded,
}

impl MissReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MissReason::Rejected => "rejected",
            MissReason::DeadlinePassed => "deadline_passed",
            MissReason::BoundExceeded => "bound_exceeded",
            MissReason::HorizonExceeded => "horizon_exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: Ticks,
    pub kind: EventKind,
    pub task_id: TaskId,
    pub core: Option<CoreId>,
    pub nlax_at_event: Option<f64>,
    pub reason: Option<MissReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub policy: PolicyId,
    pub cores: usize,
    pub trace: Vec<Event>,
    pub scheduled_count: usize,
    pub missed_count: usize,
    /// Utilisation of completed work per core, scaled by `u1` for NUL-EDF.
    pub per_core_util: Vec<f64>,
    pub avg_util: f64,
    /// Final modification factor (1 for EDF).
    pub u1: f64,
    pub final_states: Vec<(TaskId, TaskState)>,
}

/// Queue membership right after the evaluation step of one tick. Ids are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub time: Ticks,
    pub holding: Vec<TaskId>,
    /// One entry per core, index 0 is core 1.
    pub execution: Vec<Vec<TaskId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_core_util: Vec<f64>,
    pub per_core_tasks: Vec<usize>,
    pub per_core_avg: Vec<Option<f64>>,
    pub avg_util: f64,
}

/// Runs `policy` over `task_set`.
pub fn run(
    policy: PolicyId,
    task_set: &TaskSet,
    platform: &Platform,
    config: &SimConfig,
) -> Result<SimResult, EngineError> {
    Sim::new(policy, task_set, platform, config)?.run(None)
}

/// As [`run`], calling `observer` once per tick with the queue contents.
pub fn run_observed(
    policy: PolicyId,
    task_set: &TaskSet,
    platform: &Platform,
    config: &SimConfig,
    observer: &mut dyn FnMut(&TickSnapshot),
) -> Result<SimResult, EngineError> {
    Sim::new(policy, task_set, platform, config)?.run(Some(observer))
}

/// Utilisation of completed work per core and the mean of per-core averages.
///
/// A task counts toward the core it completed on with `exec / (dline - arrival)`;
/// NUL-EDF totals are multiplied by `u1`. Cores without completed tasks are
/// left out of the mean.
pub fn summarize(result: &SimResult, task_set: &TaskSet, u1: f64) -> Summary {
    let m = result.cores;
    let scale = match result.policy {
        PolicyId::Edf => 1.0,
        PolicyId::NulEdf => u1,
    };
    let mut totals = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for ev in result.trace.iter().filter(|e| e.kind == EventKind::Complete) {
        let (Some(core), Some(task)) = (ev.core, task_set.get(ev.task_id)) else {
            continue;
        };
        if let Ok(u) = metrics::utilisation(task.exec, task.relative_deadline()) {
            totals[core - 1] += u;
            counts[core - 1] += 1;
        }
    }
    let per_core_util: Vec<f64> = totals.iter().map(|t| t * scale).collect();
    let per_core_avg: Vec<Option<f64>> = per_core_util
        .iter()
        .zip(&counts)
        .map(|(&u, &c)| (c > 0).then(|| u / c as f64))
        .collect();
    let present: Vec<f64> = per_core_avg.iter().flatten().copied().collect();
    Summary { per_core_util, per_core_tasks: counts, per_core_avg, avg_util: mean_of_core_averages(&present) }
}

/// Arithmetic mean of per-core average utilisations; 0 for no cores.
pub fn mean_of_core_averages(averages: &[f64]) -> f64 {
    if averages.is_empty() {
        0.0
    } else {
        averages.iter().sum::<f64>() / averages.len() as f64
    }
}

/// Tick at which a waiting task's non-uniform laxity first stops being positive.
fn zero_laxity_tick(dline: Ticks, remaining: Ticks, weight: f64, eps: f64) -> Ticks {
    let nlax_at = |t: Ticks| metrics::laxity(dline, t, remaining) * weight;
    let mut t = dline.saturating_sub(remaining);
    while t > 0 && nlax_at(t - 1) <= eps {
        t -= 1;
    }
    while nlax_at(t) > eps {
        t += 1;
    }
    t
}

struct Slot {
    task: Task,
    state: TaskState,
    /// `exec / (dline - arrival)`.
    u: f64,
    weight: f64,
    u2: f64,
    home: CoreId,
    window: (Ticks, Ticks),
    /// Core whose reservation list holds this task.
    reserved_on: Option<CoreId>,
    trigger: Ticks,
}

impl Slot {
    fn nlax(&self, now: Ticks) -> f64 {
        metrics::laxity(self.task.dline, now, self.state.remaining) * self.weight
    }

    fn key(&self, idx: usize) -> (Ticks, TaskId, usize) {
        (self.task.dline, self.task.id, idx)
    }
}

#[derive(Default)]
struct Core {
    grant: Option<(usize, Ticks)>,
    ready: BTreeSet<(Ticks, TaskId, usize)>,
    /// Live tasks placed here, ordered by id (EDF load and NUL reservations).
    assigned: BTreeSet<(TaskId, usize)>,
}

struct Sim<'a> {
    policy: PolicyId,
    platform: &'a Platform,
    config: &'a SimConfig,
    m: usize,
    l: f64,
    slots: Vec<Slot>,
    release_order: Vec<usize>,
    next_release: usize,
    cores: Vec<Core>,
    holding: BTreeSet<(Ticks, Ticks, TaskId, usize)>,
    by_deadline: BTreeSet<(Ticks, TaskId, usize)>,
    u_max: Option<f64>,
    u1: f64,
    trace: Vec<Event>,
    live: usize,
}

impl<'a> Sim<'a> {
    fn new(
        policy: PolicyId,
        task_set: &TaskSet,
        platform: &'a Platform,
        config: &'a SimConfig,
    ) -> Result<Self, EngineError> {
        let violations = validate(task_set, platform);
        if !violations.is_empty() {
            return Err(EngineError::Invalid(violations));
        }
        if config.max_time < task_set.max_deadline() {
            return Err(EngineError::HorizonTooShort {
                max_time: config.max_time,
                max_deadline: task_set.max_deadline(),
            });
        }
        let m = platform.cores;
        let e = if config.exact_euler { std::f64::consts::E } else { metrics::EULER_TRUNCATED };
        let l = metrics::schedulability_bound_with(m, e)?;
        let mut slots = Vec::with_capacity(task_set.len());
        for task in task_set {
            slots.push(Slot {
                task: *task,
                state: TaskState::new(task),
                u: metrics::utilisation(task.exec, task.relative_deadline())?,
                weight: metrics::weight(task.quant, task.exec, task.ctot)?,
                u2: 0.0,
                home: 1,
                window: (0, 0),
                reserved_on: None,
                trigger: 0,
            });
        }
        let mut release_order: Vec<usize> = (0..slots.len()).collect();
        release_order.sort_by_key(|&i| (slots[i].task.arrival, slots[i].task.id));
        Ok(Self {
            policy,
            platform,
            config,
            m,
            l,
            slots,
            release_order,
            next_release: 0,
            cores: (0..m).map(|_| Core::default()).collect(),
            holding: BTreeSet::new(),
            by_deadline: BTreeSet::new(),
            u_max: None,
            u1: match policy {
                PolicyId::Edf => 1.0,
                PolicyId::NulEdf => metrics::modification_factor(0.0),
            },
            trace: Vec::new(),
            live: 0,
        })
    }

    fn emit(&mut self, time: Ticks, kind: EventKind, idx: usize, core: Option<CoreId>, nlax: Option<f64>) {
        let task_id = self.slots[idx].task.id;
        self.trace.push(Event { time, kind, task_id, core, nlax_at_event: nlax, reason: None });
    }

    fn run(mut self, mut observer: Option<&mut dyn FnMut(&TickSnapshot)>) -> Result<SimResult, EngineError> {
        let mut now: Ticks = 0;
        while now < self.config.max_time && (self.next_release < self.release_order.len() || self.live > 0) {
            if self.live == 0 && observer.is_none() {
                let next = self.slots[self.release_order[self.next_release]].task.arrival;
                if next > now {
                    now = next.min(self.config.max_time);
                    continue;
                }
            }
            self.release(now)?;
            if self.policy == PolicyId::NulEdf {
                self.evaluate(now);
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(&self.snapshot(now));
            }
            self.execute(now);
            self.expire(now + SimConfig::TICK);
            now += SimConfig::TICK;
        }
        let leftovers: Vec<usize> = self.by_deadline.iter().map(|&(_, _, i)| i).collect();
        for idx in leftovers {
            self.miss(self.config.max_time, idx, MissReason::HorizonExceeded);
        }
        Ok(self.finish())
    }

    fn release(&mut self, now: Ticks) -> Result<(), EngineError> {
        let start = self.next_release;
        while self.next_release < self.release_order.len()
            && self.slots[self.release_order[self.next_release]].task.arrival == now
        {
            self.next_release += 1;
        }
        let fresh: Vec<usize> = self.release_order[start..self.next_release].to_vec();
        if fresh.is_empty() {
            return Ok(());
        }
        if self.policy == PolicyId::NulEdf {
            for &idx in &fresh {
                let s = &self.slots[idx];
                let nlax = s.nlax(now);
                let u_norm = metrics::laxity_normalized_utilisation(nlax, s.task.relative_deadline())?;
                self.u_max = Some(self.u_max.map_or(u_norm, |u| u.max(u_norm)));
            }
            self.u1 = metrics::modification_factor(self.u_max.unwrap_or(0.0));
        }
        for idx in fresh {
            self.live += 1;
            let s = &mut self.slots[idx];
            s.state.status = TaskStatus::Pending;
            self.by_deadline.insert(s.key(idx));
            self.emit(now, EventKind::Release, idx, None, None);
            match self.policy {
                PolicyId::Edf => self.admit_edf(now, idx),
                PolicyId::NulEdf => self.admit_nul(now, idx),
            }
        }
        Ok(())
    }

    fn admit_edf(&mut self, now: Ticks, idx: usize) {
        let id = self.slots[idx].task.id;
        let u = self.slots[idx].u;
        let core = self.platform.pin(id).or_else(|| {
            (1..=self.m).find(|&c| {
                let load: f64 = self.cores[c - 1].assigned.iter().map(|&(_, j)| self.slots[j].u).sum();
                policies::edf_admit(u, load)
            })
        });
        let nlax = self.slots[idx].nlax(now);
        match core {
            Some(c) => {
                self.slots[idx].home = c;
                self.enqueue(idx, c);
                self.emit(now, EventKind::AdmitExecution, idx, Some(c), Some(nlax));
            }
            None => self.miss(now, idx, MissReason::Rejected),
        }
    }

    fn admit_nul(&mut self, now: Ticks, idx: usize) {
        let s = &mut self.slots[idx];
        s.u2 = metrics::modified_utilisation(self.u1, s.u);
        let placement = policies::classify(s.u2, self.m);
        let (dline, exec) = (s.task.dline, s.task.exec);
        s.window = match placement {
            Placement::HoldingQueue => (dline.saturating_sub(exec), dline),
            _ => (now, now + exec),
        };
        if placement == Placement::RejectTwoCore {
            self.miss(now, idx, MissReason::Rejected);
            return;
        }
        let home = self.platform.pin(s.task.id).unwrap_or_else(|| self.least_overlap_core(idx));
        let s = &mut self.slots[idx];
        s.home = home;
        s.reserved_on = Some(home);
        self.cores[home - 1].assigned.insert((s.task.id, idx));
        let nlax = s.nlax(now);
        match placement {
            Placement::HoldingQueue => {
                let s = &mut self.slots[idx];
                s.trigger = zero_laxity_tick(s.task.dline, s.state.remaining, s.weight, self.config.epsilon);
                s.state.queue = QueueKind::Holding;
                s.state.core = Some(home);
                self.holding.insert((s.trigger, s.task.dline, s.task.id, idx));
                self.emit(now, EventKind::AdmitHolding, idx, Some(home), Some(nlax));
            }
            _ => {
                self.enqueue(idx, home);
                self.emit(now, EventKind::AdmitExecution, idx, Some(home), Some(nlax));
            }
        }
    }

    /// Core whose live reservations overlap the task's window least; lowest index on ties.
    fn least_overlap_core(&self, idx: usize) -> CoreId {
        let (s0, e0) = self.slots[idx].window;
        let mut best = (u64::MAX, 1);
        for c in 1..=self.m {
            let overlap: u64 = self.cores[c - 1]
                .assigned
                .iter()
                .map(|&(_, j)| {
                    let (s1, e1) = self.slots[j].window;
                    e0.min(e1).saturating_sub(s0.max(s1))
                })
                .sum();
            if overlap < best.0 {
                best = (overlap, c);
            }
        }
        best.1
    }

    /// Puts a task into a core's execution queue. For EDF this is also its assignment.
    fn enqueue(&mut self, idx: usize, core: CoreId) {
        let key = self.slots[idx].key(idx);
        let id = self.slots[idx].task.id;
        let s = &mut self.slots[idx];
        s.state.queue = QueueKind::Execution;
        s.state.core = Some(core);
        if self.policy == PolicyId::Edf {
            self.cores[core - 1].assigned.insert((id, idx));
            s.reserved_on = Some(core);
        }
        self.cores[core - 1].ready.insert(key);
    }

    fn discard_reason(&self, idx: usize) -> MissReason {
        if self.slots[idx].u2 > self.l {
            MissReason::BoundExceeded
        } else {
            MissReason::DeadlinePassed
        }
    }

    fn evaluate(&mut self, now: Ticks) {
        let eps = self.config.epsilon;
        let doomed: Vec<usize> = self
            .cores
            .iter()
            .flat_map(|c| c.ready.iter().map(|&(_, _, i)| i))
            .filter(|&i| self.slots[i].nlax(now) < -eps)
            .collect();
        for idx in doomed {
            let reason = self.discard_reason(idx);
            self.miss(now, idx, reason);
        }

        let mut due: Vec<(Ticks, TaskId, usize)> = self
            .holding
            .range(..=(now, Ticks::MAX, TaskId::MAX, usize::MAX))
            .map(|&(_, d, id, i)| (d, id, i))
            .collect();
        due.sort_unstable();
        for (_, _, idx) in due {
            let s = &self.slots[idx];
            let nlax = s.nlax(now);
            match policies::evaluate_holding(nlax, s.u2, self.l, eps) {
                HoldingAction::Hold => {}
                HoldingAction::DiscardMissed => {
                    let reason = self.discard_reason(idx);
                    self.miss(now, idx, reason);
                }
                action => {
                    let home = s.home;
                    let first = match action {
                        HoldingAction::DispatchNextCore => policies::next_core(home, self.m),
                        _ => home,
                    };
                    if let Some(core) = self.free_core_from(first) {
                        let s = &mut self.slots[idx];
                        self.holding.remove(&(s.trigger, s.task.dline, s.task.id, idx));
                        if let Some(old) = s.reserved_on.replace(core) {
                            self.cores[old - 1].assigned.remove(&(s.task.id, idx));
                        }
                        self.cores[core - 1].assigned.insert((s.task.id, idx));
                        self.enqueue(idx, core);
                        self.emit(now, EventKind::AdmitExecution, idx, Some(core), Some(nlax));
                        if core != home {
                            self.emit(now, EventKind::Migrate, idx, Some(core), None);
                        }
                    }
                }
            }
        }
    }

    fn free_core_from(&self, first: CoreId) -> Option<CoreId> {
        let mut c = first;
        for _ in 0..self.m {
            let core = &self.cores[c - 1];
            if core.grant.is_none() && core.ready.is_empty() {
                return Some(c);
            }
            c = policies::next_core(c, self.m);
        }
        None
    }

    fn snapshot(&self, now: Ticks) -> TickSnapshot {
        let mut holding: Vec<TaskId> = self.holding.iter().map(|&(_, _, id, _)| id).collect();
        holding.sort_unstable();
        let execution = self
            .cores
            .iter()
            .map(|c| {
                let mut ids: Vec<TaskId> = c.ready.iter().map(|&(_, id, _)| id).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        TickSnapshot { time: now, holding, execution }
    }

    fn execute(&mut self, now: Ticks) {
        for c in 1..=self.m {
            if self.cores[c - 1].grant.is_none() {
                if let Some(&(_, _, idx)) = self.cores[c - 1].ready.first() {
                    let s = &mut self.slots[idx];
                    let len = s.task.quant.min(s.state.remaining);
                    s.state.status = TaskStatus::Running;
                    s.state.start_times.push(now);
                    self.cores[c - 1].grant = Some((idx, len));
                    self.emit(now, EventKind::StartQuantum, idx, Some(c), None);
                }
            }
        }
        for c in 1..=self.m {
            let Some((idx, left)) = self.cores[c - 1].grant else { continue };
            let end = now + SimConfig::TICK;
            self.slots[idx].state.remaining -= 1;
            let left = left - 1;
            if self.slots[idx].state.remaining == 0 {
                self.cores[c - 1].grant = None;
                self.emit(end, EventKind::EndQuantum, idx, Some(c), None);
                self.emit(end, EventKind::Complete, idx, Some(c), None);
                self.slots[idx].state.status = TaskStatus::Completed;
                self.retire(idx);
            } else if left == 0 {
                self.cores[c - 1].grant = None;
                self.emit(end, EventKind::EndQuantum, idx, Some(c), None);
            } else {
                self.cores[c - 1].grant = Some((idx, left));
            }
        }
    }

    /// Misses every live task whose deadline is at or before `t` with work left.
    fn expire(&mut self, t: Ticks) {
        let expired: Vec<usize> = self
            .by_deadline
            .range(..=(t, TaskId::MAX, usize::MAX))
            .map(|&(_, _, i)| i)
            .collect();
        for idx in expired {
            self.miss(t, idx, MissReason::DeadlinePassed);
        }
    }

    fn miss(&mut self, time: Ticks, idx: usize, reason: MissReason) {
        let core = self.slots[idx].state.core;
        if let Some(c) = core {
            if matches!(self.cores[c - 1].grant, Some((g, _)) if g == idx) {
                self.cores[c - 1].grant = None;
                self.emit(time, EventKind::EndQuantum, idx, Some(c), None);
            }
        }
        let nlax = self.slots[idx].nlax(time);
        let task_id = self.slots[idx].task.id;
        self.trace.push(Event {
            time,
            kind: EventKind::Miss,
            task_id,
            core,
            nlax_at_event: Some(nlax),
            reason: Some(reason),
        });
        self.slots[idx].state.status = TaskStatus::Missed;
        self.retire(idx);
    }

    fn retire(&mut self, idx: usize) {
        let s = &mut self.slots[idx];
        let key = s.key(idx);
        let id = s.task.id;
        if s.state.queue == QueueKind::Holding {
            self.holding.remove(&(s.trigger, s.task.dline, id, idx));
        }
        if let Some(c) = s.state.core {
            self.cores[c - 1].ready.remove(&key);
        }
        if let Some(c) = s.reserved_on.take() {
            self.cores[c - 1].assigned.remove(&(id, idx));
        }
        s.state.queue = QueueKind::None;
        if self.by_deadline.remove(&key) {
            self.live -= 1;
        }
    }

    fn finish(self) -> SimResult {
        let scheduled_count = self.slots.iter().filter(|s| s.state.status == TaskStatus::Completed).count();
        let missed_count = self.slots.iter().filter(|s| s.state.status == TaskStatus::Missed).count();
        let final_states = self.slots.iter().map(|s| (s.task.id, s.state.clone())).collect();
        let mut result = SimResult {
            policy: self.policy,
            cores: self.m,
            trace: self.trace,
            scheduled_count,
            missed_count,
            per_core_util: vec![0.0; self.m],
            avg_util: 0.0,
            u1: self.u1,
            final_states,
        };
        let tasks: TaskSet = self.slots.iter().map(|s| s.task).collect();
        let summary = summarize(&result, &tasks, self.u1);
        result.per_core_util = summary.per_core_util;
        result.avg_util = summary.avg_util;
        result
    }
}
