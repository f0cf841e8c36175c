//! Decision functions for baseline EDF and non-uniform-laxity EDF.
//!
//! These functions carry no state; the engine feeds them live values each
//! tick and acts on the result.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{two_core_bound, HOLDING_U2_LIMIT};
use crate::model::{CoreId, Task};

/// Slack allowed on the per-core utilisation sum before admission fails.
pub const ADMIT_SLACK: f64 = 1e-9;

/// Where a newly released task goes under NUL-EDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    ExecutionQueue,
    HoldingQueue,
    RejectTwoCore,
}

/// What happens to a held task at one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HoldingAction {
    Hold,
    DispatchUrgentSameCore,
    DispatchSameCore,
    DispatchNextCore,
    DiscardMissed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyId {
    Edf,
    NulEdf,
}

impl PolicyId {
    pub const ALL: [PolicyId; 2] = [PolicyId::Edf, PolicyId::NulEdf];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Edf => "edf",
            PolicyId::NulEdf => "nul-edf",
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "edf" => Ok(PolicyId::Edf),
            "nul-edf" | "nul_edf" | "nuledf" | "nul" => Ok(PolicyId::NulEdf),
            other => Err(format!("unknown policy `{other}` (expected edf or nul-edf)")),
        }
    }
}

/// Sorts by ascending absolute deadline, then ascending id.
pub fn edf_order<'a, I>(tasks: I) -> Vec<&'a Task>
where
    I: IntoIterator<Item = &'a Task>,
{
    let mut v: Vec<&Task> = tasks.into_iter().collect();
    v.sort_by_key(|t| (t.dline, t.id));
    v
}

/// True when adding `task_u` keeps the core's utilisation at or below one.
pub fn edf_admit(task_u: f64, core_load: f64) -> bool {
    core_load + task_u <= 1.0 + ADMIT_SLACK
}

/// Initial queue for a task with modified utilisation `u2` on `z` cores.
///
/// Up to two cores there is no holding stage: tasks under `(z+1)/2` run,
/// the rest are rejected. Above two cores tasks under 2 are held.
pub fn classify(u2: f64, z: usize) -> Placement {
    if z <= 2 {
        if u2 < two_core_bound(z) {
            Placement::ExecutionQueue
        } else {
            Placement::RejectTwoCore
        }
    } else if u2 < HOLDING_U2_LIMIT {
        Placement::HoldingQueue
    } else {
        Placement::ExecutionQueue
    }
}

/// Action for a held task with non-uniform laxity `nlax`.
///
/// Any negative laxity is a miss; the engine records whether `u2` exceeded
/// `l` when it logs the discard. `DispatchSameCore` is not produced here.
pub fn evaluate_holding(nlax: f64, u2: f64, _l: f64, epsilon: f64) -> HoldingAction {
    if nlax > epsilon {
        HoldingAction::Hold
    } else if nlax >= -epsilon {
        if u2 < HOLDING_U2_LIMIT {
            HoldingAction::DispatchUrgentSameCore
        } else {
            HoldingAction::DispatchNextCore
        }
    } else {
        HoldingAction::DiscardMissed
    }
}

/// Round-robin successor of a 1-based core index.
pub fn next_core(current: CoreId, m: usize) -> CoreId {
    (current % m) + 1
}
