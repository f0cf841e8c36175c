//! The six-task, four-core worked example and its reference values.

use std::collections::BTreeMap;

use crate::model::{CoreId, Platform, Task, TaskId, TaskSet};

pub const EXAMPLE_CORES: usize = 4;

/// Table rows in reference order (T6 is listed before T5). Arrival equals
/// the tabulated current time.
pub fn worked_example() -> TaskSet {
    TaskSet::new(vec![
        Task::new(1, 0, 80, 125, 10, 7),
        Task::new(2, 0, 100, 140, 15, 6),
        Task::new(3, 75, 120, 200, 20, 5),
        Task::new(4, 100, 140, 260, 30, 4),
        Task::new(6, 125, 160, 300, 25, 5),
        Task::new(5, 250, 210, 500, 28, 6),
    ])
}

/// Core placement of the non-uniform-laxity schedule figure:
/// T1 and T4 on core 1, T2 on core 2, T3 and T6 on core 3, T5 on core 4.
pub fn example_pins() -> BTreeMap<TaskId, CoreId> {
    [(1, 1), (4, 1), (2, 2), (3, 3), (6, 3), (5, 4)].into_iter().collect()
}

pub fn example_platform() -> Platform {
    Platform::with_pins(EXAMPLE_CORES, example_pins())
}

/// One reference row: weight, laxity, nlax, exec/d, nlax/d, all at two decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenRow {
    pub id: TaskId,
    pub weight: f64,
    pub lax: f64,
    pub nlax: f64,
    pub u: f64,
    pub u_norm: f64,
}

pub const GOLDEN_ROWS: [GoldenRow; 6] = [
    GoldenRow { id: 1, weight: 0.88, lax: 45.0, nlax: 39.38, u: 0.64, u_norm: 0.32 },
    GoldenRow { id: 2, weight: 0.90, lax: 40.0, nlax: 36.00, u: 0.71, u_norm: 0.26 },
    GoldenRow { id: 3, weight: 0.83, lax: 5.0, nlax: 4.17, u: 0.60, u_norm: 0.02 },
    GoldenRow { id: 4, weight: 0.86, lax: 20.0, nlax: 17.14, u: 0.54, u_norm: 0.07 },
    GoldenRow { id: 6, weight: 0.78, lax: 15.0, nlax: 11.72, u: 0.53, u_norm: 0.04 },
    GoldenRow { id: 5, weight: 0.80, lax: 40.0, nlax: 32.00, u: 0.42, u_norm: 0.06 },
];

pub const GOLDEN_U_MAX: f64 = 0.32;
pub const GOLDEN_FACTOR: f64 = 1.68;
pub const GOLDEN_BOUND_4: f64 = 2.528;

/// Per-core average utilisations read off the two schedule figures.
pub const EDF_CORE_AVERAGES: [f64; 4] = [0.44, 0.47, 0.43, 0.16];
pub const NUL_CORE_AVERAGES: [f64; 4] = [0.98, 1.19, 0.57, 0.89];
pub const GOLDEN_EDF_AVG: f64 = 0.38;
pub const GOLDEN_NUL_AVG: f64 = 0.91;
