//! Multicore real-time scheduling simulator comparing earliest-deadline-first
//! with a non-uniform-laxity EDF variant for aperiodic tasks.
//!
//! * [`model`]: tasks, platforms, configuration and validation.
//! * [`metrics`]: laxity, weight, utilisation and bound formulas.
//! * [`policies`]: stateless EDF and NUL-EDF decision functions.
//! * [`engine`]: the tick-driven simulator.
//! * [`workload`]: seeded task-set generation and task-set files.
//! * [`report`]: comparison sweeps, trace export, the worked example.

pub mod engine;
pub mod fixture;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod report;
pub mod workload;

pub use engine::{run, run_observed, summarize, Event, EventKind, MissReason, SimResult, Summary, TickSnapshot};
pub use model::{validate, CoreId, Platform, SimConfig, Task, TaskId, TaskSet, Ticks, Violation};
pub use policies::PolicyId;
