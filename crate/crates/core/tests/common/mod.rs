//! Shared helpers for integration tests: a brute-force reference simulator
//! and a random instance generator.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nulsched::engine::{EventKind, MissReason, SimResult, TickSnapshot};
use nulsched::metrics;
use nulsched::policies::{self, HoldingAction, Placement};
use nulsched::{CoreId, Platform, PolicyId, SimConfig, Task, TaskId, TaskSet, Ticks};

/// Final fate of one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed { time: Ticks, core: CoreId },
    Missed { time: Ticks, reason: MissReason },
    Unreleased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Where {
    Waiting,
    Held,
    Exec(CoreId),
    Done,
}

struct T {
    task: Task,
    remaining: Ticks,
    at: Where,
    home: CoreId,
    reserved: Option<CoreId>,
    window: (Ticks, Ticks),
    u: f64,
    weight: f64,
    u2: f64,
    u_norm_at_release: f64,
}

impl T {
    fn nlax(&self, now: Ticks) -> f64 {
        metrics::laxity(self.task.dline, now, self.remaining) * self.weight
    }
    fn live(&self) -> bool {
        matches!(self.at, Where::Held | Where::Exec(_))
    }
}

pub struct OracleRun {
    pub snapshots: Vec<TickSnapshot>,
    pub outcomes: BTreeMap<TaskId, Outcome>,
}

/// Straightforward re-statement of the scheduling rules. Every tick rebuilds
/// queue membership, U1, per-core load and reservation overlap from scratch.
pub fn oracle(policy: PolicyId, ts: &TaskSet, platform: &Platform, cfg: &SimConfig) -> OracleRun {
    let m = platform.cores;
    let eps = cfg.epsilon;
    let e = if cfg.exact_euler { std::f64::consts::E } else { metrics::EULER_TRUNCATED };
    let l = metrics::schedulability_bound_with(m, e).unwrap();
    let mut ts_sorted: Vec<Task> = ts.iter().copied().collect();
    ts_sorted.sort_by_key(|t| t.id);
    let mut tasks: Vec<T> = ts_sorted
        .into_iter()
        .map(|task| {
            let rel = task.dline - task.arrival;
            let weight = metrics::weight(task.quant, task.exec, task.ctot).unwrap();
            let nlax0 = metrics::laxity(task.dline, task.arrival, task.exec) * weight;
            T {
                task,
                remaining: task.exec,
                at: Where::Waiting,
                home: 1,
                reserved: None,
                window: (0, 0),
                u: metrics::utilisation(task.exec, rel).unwrap(),
                weight,
                u2: 0.0,
                u_norm_at_release: metrics::laxity_normalized_utilisation(nlax0, rel).unwrap(),
            }
        })
        .collect();
    let mut grants: Vec<Option<(usize, Ticks)>> = vec![None; m];
    let mut outcomes: BTreeMap<TaskId, Outcome> = BTreeMap::new();
    let mut snapshots = Vec::new();

    let mut now: Ticks = 0;
    loop {
        let pending = tasks.iter().any(|t| t.at == Where::Waiting || t.live());
        if now >= cfg.max_time || !pending {
            break;
        }
        // releases, in id order
        let fresh: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].task.arrival == now).collect();
        let u1 = if policy == PolicyId::NulEdf {
            let released: Vec<f64> =
                tasks.iter().filter(|t| t.task.arrival <= now).map(|t| t.u_norm_at_release).collect();
            let u_max = released.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            metrics::modification_factor(if released.is_empty() { 0.0 } else { u_max })
        } else {
            1.0
        };
        for i in fresh {
            let id = tasks[i].task.id;
            match policy {
                PolicyId::Edf => {
                    let chosen = platform.pin(id).or_else(|| {
                        (1..=m).find(|&c| {
                            let mut load = 0.0;
                            for t in tasks.iter().filter(|t| t.live() && t.reserved == Some(c)) {
                                load += t.u;
                            }
                            policies::edf_admit(tasks[i].u, load)
                        })
                    });
                    match chosen {
                        Some(c) => {
                            tasks[i].at = Where::Exec(c);
                            tasks[i].home = c;
                            tasks[i].reserved = Some(c);
                        }
                        None => {
                            tasks[i].at = Where::Done;
                            outcomes.insert(id, Outcome::Missed { time: now, reason: MissReason::Rejected });
                        }
                    }
                }
                PolicyId::NulEdf => {
                    let t = &mut tasks[i];
                    t.u2 = metrics::modified_utilisation(u1, t.u);
                    let placement = policies::classify(t.u2, m);
                    if placement == Placement::RejectTwoCore {
                        t.at = Where::Done;
                        outcomes.insert(id, Outcome::Missed { time: now, reason: MissReason::Rejected });
                        continue;
                    }
                    t.window = if placement == Placement::HoldingQueue {
                        (t.task.dline.saturating_sub(t.task.exec), t.task.dline)
                    } else {
                        (now, now + t.task.exec)
                    };
                    let home = platform.pin(id).unwrap_or_else(|| {
                        let mut best = (u64::MAX, 1);
                        for c in 1..=m {
                            let mut overlap = 0u64;
                            for o in tasks.iter().filter(|o| o.live() && o.reserved == Some(c)) {
                                for tick in tasks[i].window.0..tasks[i].window.1 {
                                    if tick >= o.window.0 && tick < o.window.1 {
                                        overlap += 1;
                                    }
                                }
                            }
                            if overlap < best.0 {
                                best = (overlap, c);
                            }
                        }
                        best.1
                    });
                    let t = &mut tasks[i];
                    t.home = home;
                    t.reserved = Some(home);
                    t.at = if placement == Placement::HoldingQueue { Where::Held } else { Where::Exec(home) };
                }
            }
        }

        if policy == PolicyId::NulEdf {
            for t in tasks.iter_mut() {
                if matches!(t.at, Where::Exec(_)) && t.nlax(now) < -eps {
                    let reason = if t.u2 > l { MissReason::BoundExceeded } else { MissReason::DeadlinePassed };
                    t.at = Where::Done;
                    outcomes.insert(t.task.id, Outcome::Missed { time: now, reason });
                }
            }
            for g in grants.iter_mut() {
                if matches!(*g, Some((i, _)) if tasks[i].at == Where::Done) {
                    *g = None;
                }
            }
            let mut held: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].at == Where::Held).collect();
            held.sort_by_key(|&i| (tasks[i].task.dline, tasks[i].task.id));
            for i in held {
                let nlax = tasks[i].nlax(now);
                match policies::evaluate_holding(nlax, tasks[i].u2, l, eps) {
                    HoldingAction::Hold => {}
                    HoldingAction::DiscardMissed => {
                        let reason =
                            if tasks[i].u2 > l { MissReason::BoundExceeded } else { MissReason::DeadlinePassed };
                        tasks[i].at = Where::Done;
                        outcomes.insert(tasks[i].task.id, Outcome::Missed { time: now, reason });
                    }
                    action => {
                        let first = if action == HoldingAction::DispatchNextCore {
                            policies::next_core(tasks[i].home, m)
                        } else {
                            tasks[i].home
                        };
                        let mut c = first;
                        for _ in 0..m {
                            let busy = grants[c - 1].is_some()
                                || tasks.iter().any(|t| t.at == Where::Exec(c));
                            if !busy {
                                tasks[i].at = Where::Exec(c);
                                tasks[i].reserved = Some(c);
                                break;
                            }
                            c = policies::next_core(c, m);
                        }
                    }
                }
            }
        }

        let mut holding: Vec<TaskId> = tasks.iter().filter(|t| t.at == Where::Held).map(|t| t.task.id).collect();
        holding.sort_unstable();
        let execution = (1..=m)
            .map(|c| {
                let mut ids: Vec<TaskId> =
                    tasks.iter().filter(|t| t.at == Where::Exec(c)).map(|t| t.task.id).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        snapshots.push(TickSnapshot { time: now, holding, execution });

        for c in 1..=m {
            if let Some((g, _)) = grants[c - 1] {
                if tasks[g].at != Where::Exec(c) {
                    grants[c - 1] = None;
                }
            }
            if grants[c - 1].is_none() {
                let pick = (0..tasks.len())
                    .filter(|&i| tasks[i].at == Where::Exec(c))
                    .min_by_key(|&i| (tasks[i].task.dline, tasks[i].task.id));
                if let Some(i) = pick {
                    grants[c - 1] = Some((i, tasks[i].task.quant.min(tasks[i].remaining)));
                }
            }
            if let Some((i, left)) = grants[c - 1] {
                tasks[i].remaining -= 1;
                if tasks[i].remaining == 0 {
                    tasks[i].at = Where::Done;
                    outcomes.insert(tasks[i].task.id, Outcome::Completed { time: now + 1, core: c });
                    grants[c - 1] = None;
                } else if left == 1 {
                    grants[c - 1] = None;
                } else {
                    grants[c - 1] = Some((i, left - 1));
                }
            }
        }

        for t in tasks.iter_mut() {
            if t.live() && t.task.dline <= now + 1 {
                t.at = Where::Done;
                outcomes.insert(t.task.id, Outcome::Missed { time: now + 1, reason: MissReason::DeadlinePassed });
            }
        }
        for g in grants.iter_mut() {
            if let Some((i, _)) = *g {
                if tasks[i].at == Where::Done {
                    *g = None;
                }
            }
        }
        now += 1;
    }
    for t in &tasks {
        outcomes.entry(t.task.id).or_insert(if t.live() {
            Outcome::Missed { time: cfg.max_time, reason: MissReason::HorizonExceeded }
        } else {
            Outcome::Unreleased
        });
    }
    OracleRun { snapshots, outcomes }
}

/// Outcomes as recorded in an engine trace.
pub fn engine_outcomes(ts: &TaskSet, r: &SimResult) -> BTreeMap<TaskId, Outcome> {
    let mut out: BTreeMap<TaskId, Outcome> = ts.iter().map(|t| (t.id, Outcome::Unreleased)).collect();
    for e in &r.trace {
        match e.kind {
            EventKind::Complete => {
                out.insert(e.task_id, Outcome::Completed { time: e.time, core: e.core.unwrap() });
            }
            EventKind::Miss => {
                out.insert(e.task_id, Outcome::Missed { time: e.time, reason: e.reason.unwrap() });
            }
            _ => {}
        }
    }
    out
}

/// A small random instance: up to `max_n` tasks on up to `max_m` cores, with
/// tight deadlines so queues contend. About a third of instances pin tasks.
pub fn random_instance(seed: u64, max_n: usize, max_m: usize) -> (TaskSet, Platform) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let tasks: Vec<Task> = (1..=n as TaskId)
        .map(|id| {
            let arrival = rng.gen_range(0..=60);
            let exec = rng.gen_range(1..=40);
            let dline = arrival + rng.gen_range(1..=2 * exec + 10);
            let quant = rng.gen_range(1..=exec);
            let ctot = rng.gen_range(1..=8);
            Task::new(id, arrival, exec, dline, quant, ctot)
        })
        .collect();
    let mut platform = Platform::new(m);
    if rng.gen_bool(0.35) {
        for t in &tasks {
            if rng.gen_bool(0.5) {
                platform.pinned.insert(t.id, rng.gen_range(1..=m));
            }
        }
    }
    (TaskSet::new(tasks), platform)
}

/// Runs engine and oracle and returns the first disagreement, if any.
pub fn check_against_oracle(policy: PolicyId, ts: &TaskSet, platform: &Platform) -> Result<(), String> {
    let cfg = SimConfig::for_task_set(ts);
    let mut snaps = Vec::new();
    let r = nulsched::run_observed(policy, ts, platform, &cfg, &mut |s| snaps.push(s.clone()))
        .map_err(|e| e.to_string())?;
    let o = oracle(policy, ts, platform, &cfg);
    if snaps.len() != o.snapshots.len() {
        return Err(format!("{policy}: {} engine ticks vs {} oracle ticks", snaps.len(), o.snapshots.len()));
    }
    for (a, b) in snaps.iter().zip(&o.snapshots) {
        if a != b {
            return Err(format!("{policy}: queues differ at t={}: engine {a:?} oracle {b:?}", a.time));
        }
    }
    let eo = engine_outcomes(ts, &r);
    if eo != o.outcomes {
        return Err(format!("{policy}: outcomes differ: engine {eo:?} oracle {:?}", o.outcomes));
    }
    Ok(())
}
