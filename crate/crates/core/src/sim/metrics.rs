use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Scenario, TrajectoryLog};
use crate::error::{Error, Result};

/// Settling band as a fraction of the step magnitude.
pub const SETTLING_BAND: f64 = 0.02;
/// A torque counts as saturated within this distance of its bound.
pub const SATURATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Per-axis angle RMSE, rad.
    pub rmse: [f64; 3],
    /// `None` for tracking scenarios. Inner `None` marks an axis that never settled.
    pub settling_time: Option<[Option<f64>; 3]>,
    /// Largest excursion past the target as a fraction of the step; `None` for tracking scenarios.
    pub overshoot: Option<[f64; 3]>,
    /// Fraction of steps with the torque at its bound, per axis.
    pub saturation_duty: [f64; 3],
    /// `Σ|τ_{k+1} − τ_k|` per axis.
    pub torque_total_variation: [f64; 3],
    pub max_abs_torque: f64,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

pub fn compute_metrics(log: &TrajectoryLog, scenario: &Scenario) -> Result<Metrics> {
    let first = log.records.first().ok_or(Error::EmptyLog)?;
    let n = log.records.len() as f64;
    let errors: Vec<[f64; 3]> = log
        .records
        .iter()
        .map(|r| {
            let e = r.state.xi1 - scenario.reference(r.t).xi1d;
            [e.x, e.y, e.z]
        })
        .collect();

    let mut rmse = [0.0; 3];
    let mut saturation_duty = [0.0; 3];
    let mut torque_total_variation = [0.0; 3];
    let u_max = log.header.u_max;
    for axis in 0..3 {
        rmse[axis] = (errors.iter().map(|e| e[axis] * e[axis]).sum::<f64>() / n).sqrt();
        let saturated = log
            .records
            .iter()
            .filter(|r| r.applied[axis].abs() >= u_max[axis] - SATURATION_TOL)
            .count();
        saturation_duty[axis] = saturated as f64 / n;
        torque_total_variation[axis] = log
            .records
            .windows(2)
            .map(|w| (w[1].applied[axis] - w[0].applied[axis]).abs())
            .sum();
    }
    let max_abs_torque = log
        .records
        .iter()
        .map(|r| r.applied.amax())
        .fold(0.0, f64::max);

    let (settling_time, overshoot) = if scenario.is_step() {
        let target = scenario.reference(first.t).xi1d;
        let mut settle = [None; 3];
        let mut over = [0.0; 3];
        for axis in 0..3 {
            let step = target[axis] - first.state.xi1[axis];
            let band = SETTLING_BAND * step.abs();
            // Index of the last sample outside the band.
            let last_out = errors.iter().rposition(|e| e[axis].abs() > band);
            settle[axis] = match last_out {
                None => Some(first.t),
                Some(k) if k + 1 < errors.len() => Some(log.records[k + 1].t),
                Some(_) => None,
            };
            if step != 0.0 {
                over[axis] = errors
                    .iter()
                    .map(|e| e[axis] / step)
                    .fold(0.0, f64::max);
            }
        }
        (Some(settle), Some(over))
    } else {
        (None, None)
    };

    Ok(Metrics {
        rmse,
        settling_time,
        overshoot,
        saturation_duty,
        torque_total_variation,
        max_abs_torque,
    })
}

/// Maximal runs of consecutive steps where at least one torque axis sits at its bound.
pub fn saturation_intervals(log: &TrajectoryLog) -> Vec<Range<usize>> {
    let u_max = log.header.u_max;
    let mut out = Vec::new();
    let mut start = None;
    for (k, r) in log.records.iter().enumerate() {
        let sat = (0..3).any(|a| r.applied[a].abs() >= u_max[a] - SATURATION_TOL);
        match (sat, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push(s..k);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..log.records.len());
    }
    out
}
