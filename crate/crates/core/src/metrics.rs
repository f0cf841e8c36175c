//! Laxity, weight and utilisation formulas.
//!
//! Every function here is pure. Policies, the engine and the report layer
//! all go through these so there is exactly one definition of each quantity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Task, Ticks};

/// Euler's number truncated to three decimals. The golden bound
/// `4 * (1 - 1/e) = 2.528` depends on this value.
#[allow(clippy::approx_constant)]
pub const EULER_TRUNCATED: f64 = 2.718;

/// Strict threshold on modified utilisation separating the holding queue
/// from the execution queue on platforms with more than two cores.
pub const HOLDING_U2_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("{what} must be positive")]
    ZeroDenominator { what: &'static str },
    #[error("weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("core count must be at least 1")]
    NoCores,
}

/// `dline - (now + remaining_exec)`. Negative once the task can no longer finish in time.
pub fn laxity(dline: Ticks, now: Ticks, remaining_exec: Ticks) -> f64 {
    dline as f64 - (now as f64 + remaining_exec as f64)
}

/// `(quant / total) * ctot`.
pub fn weight(quant: Ticks, total: Ticks, ctot: Ticks) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(MetricsError::ZeroDenominator { what: "allocated time" });
    }
    Ok(quant as f64 / total as f64 * ctot as f64)
}

pub fn non_uniform_laxity(lax: f64, weight: f64) -> Result<f64, MetricsError> {
    if weight <= 0.0 || weight.is_nan() {
        return Err(MetricsError::NonPositiveWeight(weight));
    }
    Ok(lax * weight)
}

/// `exec / deadline`. Callers choose the deadline convention; the engine
/// passes deadlines relative to arrival.
pub fn utilisation(exec: Ticks, dline: Ticks) -> Result<f64, MetricsError> {
    if dline == 0 {
        return Err(MetricsError::ZeroDenominator { what: "deadline" });
    }
    Ok(exec as f64 / dline as f64)
}

/// `nlax / dline`.
pub fn laxity_normalized_utilisation(nlax: f64, dline: Ticks) -> Result<f64, MetricsError> {
    if dline == 0 {
        return Err(MetricsError::ZeroDenominator { what: "deadline" });
    }
    Ok(nlax / dline as f64)
}

/// `1.5 + |u_max - 0.5|`; never below 1.5.
pub fn modification_factor(u_max: f64) -> f64 {
    1.5 + (u_max - 0.5).abs()
}

pub fn modified_utilisation(u1: f64, u: f64) -> f64 {
    u1 * u
}

/// `z * (1 - 1/e)` with the truncated constant.
pub fn schedulability_bound(z: usize) -> Result<f64, MetricsError> {
    schedulability_bound_with(z, EULER_TRUNCATED)
}

/// As [`schedulability_bound`] with an explicit value for `e`.
pub fn schedulability_bound_with(z: usize, e: f64) -> Result<f64, MetricsError> {
    if z == 0 {
        return Err(MetricsError::NoCores);
    }
    Ok(z as f64 * (1.0 - 1.0 / e))
}

/// `(z + 1) / 2`, the two-core admission ceiling.
pub fn two_core_bound(z: usize) -> f64 {
    (z as f64 + 1.0) / 2.0
}

/// All per-task quantities of one evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub lax: f64,
    pub weight: f64,
    pub nlax: f64,
    /// `exec / dline`.
    pub u: f64,
    /// `nlax / dline`.
    pub u_norm: f64,
    /// `u1 * u`.
    pub u2: f64,
}

/// Evaluates `task` at `now` with `remaining` ticks of work left.
///
/// Utilisations use the stored deadline, measured from time zero, which is
/// how the worked example tabulates them.
pub fn snapshot(task: &Task, now: Ticks, remaining: Ticks, u1: f64) -> Result<MetricSnapshot, MetricsError> {
    let lax = laxity(task.dline, now, remaining);
    let weight = weight(task.quant, task.exec, task.ctot)?;
    let nlax = non_uniform_laxity(lax, weight)?;
    let u = utilisation(task.exec, task.dline)?;
    let u_norm = laxity_normalized_utilisation(nlax, task.dline)?;
    Ok(MetricSnapshot { lax, weight, nlax, u, u_norm, u2: modified_utilisation(u1, u) })
}

/// Platform-level constants derived from the core count and the task set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    /// `z * (1 - 1/e)`.
    pub l: f64,
    pub two_core: f64,
    /// Modification factor.
    pub u1: f64,
    pub u_max: f64,
    pub e: f64,
}

impl BoundSet {
    pub fn new(z: usize, u_max: f64, exact_euler: bool) -> Result<Self, MetricsError> {
        let e = if exact_euler { std::f64::consts::E } else { EULER_TRUNCATED };
        Ok(Self {
            l: schedulability_bound_with(z, e)?,
            two_core: two_core_bound(z),
            u1: modification_factor(u_max),
            u_max,
            e,
        })
    }
}

/// Rounds half-up to two decimals for display. A small nudge keeps values
/// like 0.315 from falling to 0.31 because of binary representation.
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-9).floor() / 100.0
}
