//! Domain types shared by the metrics, policies, engine and workload modules.
//!
//! All times are integer ticks. Nothing here schedules anything; the only
//! behaviour is [`validate`], which reports invariant violations as data.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in ticks.
pub type Ticks = u64;

/// Task identifier. Valid ids are positive.
pub type TaskId = u32;

/// Core index, 1-based.
pub type CoreId = usize;

/// Static parameters of one aperiodic task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub arrival: Ticks,
    /// Allocated execution time.
    pub exec: Ticks,
    /// Absolute deadline.
    pub dline: Ticks,
    /// Quantum slice actually used per grant.
    pub quant: Ticks,
    /// Core total time reserved per quantum.
    pub ctot: Ticks,
    /// Current-time snapshot used when evaluating the task outside a simulation.
    pub cur: Ticks,
}

impl Task {
    /// Builds a task whose `cur` snapshot equals its arrival.
    pub fn new(id: TaskId, arrival: Ticks, exec: Ticks, dline: Ticks, quant: Ticks, ctot: Ticks) -> Self {
        Self { id, arrival, exec, dline, quant, ctot, cur: arrival }
    }

    pub fn with_cur(mut self, cur: Ticks) -> Self {
        self.cur = cur;
        self
    }

    /// Deadline measured from the task's own arrival.
    pub fn relative_deadline(&self) -> Ticks {
        self.dline.saturating_sub(self.arrival)
    }
}

/// An ordered collection of tasks. Order is preserved as given (file order);
/// uniqueness of ids is checked by [`validate`], not enforced on construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    tasks: Vec<Task>,
}

impl TaskSet {
    pub fn new(tasks: Vec<Task>) -> Self {
        Self { tasks }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Task> {
        self.tasks.iter()
    }

    pub fn get(&self, id: TaskId) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn max_deadline(&self) -> Ticks {
        self.tasks.iter().map(|t| t.dline).max().unwrap_or(0)
    }

    pub fn into_inner(self) -> Vec<Task> {
        self.tasks
    }
}

impl FromIterator<Task> for TaskSet {
    fn from_iter<I: IntoIterator<Item = Task>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TaskSet {
    type Item = &'a Task;
    type IntoIter = std::slice::Iter<'a, Task>;

    fn into_iter(self) -> Self::IntoIter {
        self.tasks.iter()
    }
}

/// Core count plus optional task-to-core pinning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Platform {
    pub cores: usize,
    pub pinned: BTreeMap<TaskId, CoreId>,
}

impl Platform {
    pub fn new(cores: usize) -> Self {
        Self { cores, pinned: BTreeMap::new() }
    }

    pub fn with_pins(cores: usize, pinned: BTreeMap<TaskId, CoreId>) -> Self {
        Self { cores, pinned }
    }

    pub fn pin(&self, id: TaskId) -> Option<CoreId> {
        self.pinned.get(&id).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueueKind {
    None,
    Holding,
    Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskStatus {
    Pending,
    Running,
    Completed,
    Missed,
}

/// Evolving per-task simulation state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub remaining: Ticks,
    pub queue: QueueKind,
    pub core: Option<CoreId>,
    pub status: TaskStatus,
    /// Tick at which each quantum grant started.
    pub start_times: Vec<Ticks>,
}

impl TaskState {
    pub fn new(task: &Task) -> Self {
        Self {
            remaining: task.exec,
            queue: QueueKind::None,
            core: None,
            status: TaskStatus::Pending,
            start_times: Vec::new(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.status, TaskStatus::Completed | TaskStatus::Missed)
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Simulation horizon; must cover the latest deadline.
    pub max_time: Ticks,
    /// Tolerance for the zero non-uniform-laxity test.
    pub epsilon: f64,
    /// Use the full-precision Euler constant in the core-count bound instead of 2.718.
    pub exact_euler: bool,
}

impl SimConfig {
    /// One tick; the clock never advances by anything else.
    pub const TICK: Ticks = 1;
    pub const DEFAULT_EPSILON: f64 = 1e-9;

    pub fn new(max_time: Ticks) -> Self {
        Self { seed: 0, max_time, epsilon: Self::DEFAULT_EPSILON, exact_euler: false }
    }

    /// Config whose horizon is exactly the latest deadline of `tasks`.
    pub fn for_task_set(tasks: &TaskSet) -> Self {
        Self::new(tasks.max_deadline())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Violation {
    NoCores,
    ZeroId,
    DuplicateId(TaskId),
    ZeroExec(TaskId),
    ZeroQuant(TaskId),
    ZeroCtot(TaskId),
    QuantExceedsExec(TaskId),
    DeadlineNotAfterArrival(TaskId),
    PinnedCoreOutOfRange { task: TaskId, core: CoreId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoCores => write!(f, "platform has no cores"),
            Violation::ZeroId => write!(f, "task id 0 is not allowed"),
            Violation::DuplicateId(id) => write!(f, "task id {id} appears more than once"),
            Violation::ZeroExec(id) => write!(f, "task {id}: exec must be positive"),
            Violation::ZeroQuant(id) => write!(f, "task {id}: quant must be positive"),
            Violation::ZeroCtot(id) => write!(f, "task {id}: ctot must be positive"),
            Violation::QuantExceedsExec(id) => write!(f, "task {id}: quant exceeds exec"),
            Violation::DeadlineNotAfterArrival(id) => {
                write!(f, "task {id}: deadline must be after arrival")
            }
            Violation::PinnedCoreOutOfRange { task, core } => {
                write!(f, "task {task}: pinned core {core} is outside the platform")
            }
        }
    }
}

/// Reports every invariant violation of `task_set` on `platform`. An empty
/// result means the inputs are valid. The result is sorted, so it does not
/// depend on task order.
pub fn validate(task_set: &TaskSet, platform: &Platform) -> Vec<Violation> {
    let mut out = Vec::new();
    if platform.cores == 0 {
        out.push(Violation::NoCores);
    }
    let mut seen = HashSet::new();
    let mut dups = HashSet::new();
    for t in task_set {
        if t.id == 0 {
            out.push(Violation::ZeroId);
        }
        if !seen.insert(t.id) && dups.insert(t.id) {
            out.push(Violation::DuplicateId(t.id));
        }
        if t.exec == 0 {
            out.push(Violation::ZeroExec(t.id));
        }
        if t.quant == 0 {
            out.push(Violation::ZeroQuant(t.id));
        }
        if t.ctot == 0 {
            out.push(Violation::ZeroCtot(t.id));
        }
        if t.quant > t.exec {
            out.push(Violation::QuantExceedsExec(t.id));
        }
        if t.dline <= t.arrival {
            out.push(Violation::DeadlineNotAfterArrival(t.id));
        }
    }
    for (&task, &core) in &platform.pinned {
        if core == 0 || core > platform.cores {
            out.push(Violation::PinnedCoreOutOfRange { task, core });
        }
    }
    out.sort();
    out.dedup();
    out
}
