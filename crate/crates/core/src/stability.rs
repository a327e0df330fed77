//! Norm bounds and stability certificates.
//!
//! [`feasibility_margin`] evaluates the scalar recursive-feasibility
//! condition for the LNMPC with the sliding-mode law as auxiliary controller:
//!
//! ```text
//! l̄₂(ξ̄₃d + λ̄Z̄ + Īξ̄₂²) + l̄₂[c̄₁ + c̄₂(1+λ̄)Z̄] ≤ τ_max
//! ```
//!
//! When it holds, the unsaturated sliding-mode torque never exceeds the
//! torque limit, so it is always a feasible candidate for the OCP.
//! [`lyapunov_monitor`] checks the decrease property empirically on a
//! completed closed-loop log.

use nalgebra::{Dim, Matrix, RawStorage, Vector3};
use serde::{Deserialize, Serialize};

use crate::controllers::{SmcGains, TrackingError};
use crate::dynamics::UavParams;
use crate::error::{Error, Result};
use crate::lnmpc::StateConstraints;
use crate::sim::TrajectoryLog;

/// Infinity norm. For a column vector this is `max |x_k|`; for a matrix it is
/// the maximum absolute row sum, the operator norm induced by the vector
/// ∞-norm, so `‖MN‖ ≤ ‖M‖‖N‖`.
pub fn max_norm<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(x: &Matrix<f64, R, C, S>) -> f64 {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(Σ|x_k|^p)^{1/p}` for `p ≥ 1`.
pub fn p_norm(x: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidNormOrder(p));
    }
    if p.is_infinite() {
        return Ok(x.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
    }
    // Scale by the largest entry so large p does not overflow.
    let scale = x.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = x.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    Ok(scale * sum.powf(1.0 / p))
}

/// Bounds on states, references, model matrices, and gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub xi1_bar: f64,
    pub xi2_bar: f64,
    pub xi3_bar: f64,
    pub xi1d_bar: f64,
    pub xi2d_bar: f64,
    pub xi3d_bar: f64,
    /// Bound on `‖G₁‖∞`.
    pub i_bar: f64,
    /// Bound on `‖G₂‖∞`.
    pub l1_bar: f64,
    /// Bound on `‖G₂⁻¹‖∞`.
    pub l2_bar: f64,
    /// `‖Z(0)‖₂`.
    pub z_bar: f64,
    pub lambda_bar: f64,
    pub c1_bar: f64,
    pub c2_bar: f64,
    pub tau_max: f64,
}

/// Reference bounds `(ξ̄₁d, ξ̄₂d, ξ̄₃d)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceBounds {
    pub angle: f64,
    pub rate: f64,
    pub accel: f64,
}

fn max_abs(v: &Vector3<f64>) -> f64 {
    v.amax()
}

/// Derives the certificate inputs from the model, limits, gains, and the
/// initial tracking error.
///
/// The inertia differences enter through their absolute values so that
/// `i_bar` is a genuine norm bound. `xi1_bar` covers the bounded angles only
/// (yaw is unconstrained), and `tau_max` is the tightest per-axis torque limit.
pub fn derive_bounds(
    params: &UavParams,
    constraints: &StateConstraints,
    reference: &ReferenceBounds,
    gains: &SmcGains,
    z0: &TrackingError,
) -> BoundSet {
    let i_bar = max_abs(&params.g1());
    let l1_bar = max_abs(&params.g2());
    let l2_bar = max_abs(&params.g2_inv());
    let finite_max = |vals: &[f64]| {
        vals.iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    };
    let xi = constraints.xi_max;
    let xi1_bar = finite_max(&[xi[0], xi[1], xi[2]]);
    let xi2_bar = finite_max(&[xi[3], xi[4], xi[5]]);
    let tau_max = constraints.u_max.min();
    BoundSet {
        xi1_bar,
        xi2_bar,
        xi3_bar: i_bar * xi2_bar * xi2_bar + l1_bar * constraints.u_max.max(),
        xi1d_bar: reference.angle,
        xi2d_bar: reference.rate,
        xi3d_bar: reference.accel,
        i_bar,
        l1_bar,
        l2_bar,
        z_bar: z0.norm(),
        lambda_bar: max_abs(&gains.lambda),
        c1_bar: max_abs(&gains.c1),
        c2_bar: max_abs(&gains.c2),
        tau_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMargin {
    /// Worst-case sliding-mode torque bound.
    pub lhs: f64,
    /// `τ_max − lhs`; the certificate holds iff this is `≥ 0`.
    pub margin: f64,
}

impl FeasibilityMargin {
    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }
}

pub fn feasibility_margin(b: &BoundSet) -> FeasibilityMargin {
    let equivalent = b.l2_bar * (b.xi3d_bar + b.lambda_bar * b.z_bar + b.i_bar * b.xi2_bar.powi(2));
    let switching = b.l2_bar * (b.c1_bar + b.c2_bar * (1.0 + b.lambda_bar) * b.z_bar);
    let lhs = equivalent + switching;
    FeasibilityMargin {
        lhs,
        margin: b.tau_max - lhs,
    }
}

/// Certified bound on `‖s‖∞` under sliding-mode control: `(1 + λ̄)·Z̄`.
pub fn smc_bound_proposition2(b: &BoundSet) -> f64 {
    (1.0 + b.lambda_bar) * b.z_bar
}

/// Tolerance used by the monitor for both checks.
pub const MONITOR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MonitorReport {
    /// Steps where the contraction constraint was violated.
    pub contraction_violations: Vec<usize>,
    /// Steps where `V̇ > 0` at the applied torque while `s ≠ 0`.
    pub increase_violations: Vec<usize>,
    pub initial_error_norm: Option<f64>,
    pub final_error_norm: Option<f64>,
}

impl MonitorReport {
    pub fn is_clean(&self) -> bool {
        self.contraction_violations.is_empty() && self.increase_violations.is_empty()
    }

    /// `final ‖Z‖ / initial ‖Z‖`, when both exist and the initial error is nonzero.
    pub fn error_ratio(&self) -> Option<f64> {
        match (self.initial_error_norm, self.final_error_norm) {
            (Some(a), Some(b)) if a > 0.0 => Some(b / a),
            _ => None,
        }
    }
}

pub fn lyapunov_monitor(log: &TrajectoryLog) -> MonitorReport {
    let mut report = MonitorReport::default();
    for (k, rec) in log.records.iter().enumerate() {
        if rec.contraction_lhs > rec.contraction_rhs + MONITOR_TOL {
            report.contraction_violations.push(k);
        }
        if rec.v_smc > 0.0 && rec.contraction_lhs > MONITOR_TOL {
            report.increase_violations.push(k);
        }
    }
    report.initial_error_norm = log.records.first().map(|r| r.error().norm());
    report.final_error_norm = log.records.last().map(|r| r.error().norm());
    report
}

/// Certificate plus monitor output for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub bounds: BoundSet,
    pub feasibility: FeasibilityMargin,
    pub certified: bool,
    pub sliding_bound: f64,
    pub monitor: MonitorReport,
}

pub fn stability_report(bounds: BoundSet, log: &TrajectoryLog) -> StabilityReport {
    let feasibility = feasibility_margin(&bounds);
    StabilityReport {
        bounds,
        certified: feasibility.holds(),
        feasibility,
        sliding_bound: smc_bound_proposition2(&bounds),
        monitor: lyapunov_monitor(log),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

    pub(crate) fn worked_example() -> BoundSet {
        BoundSet {
            xi1_bar: 0.0,
            xi2_bar: std::f64::consts::FRAC_PI_2,
            xi3_bar: 0.0,
            xi1d_bar: 0.0,
            xi2d_bar: 0.0,
            xi3d_bar: 1.0,
            i_bar: 1.0,
            l1_bar: 50.0,
            l2_bar: 0.01 / 0.21,
            z_bar: 0.5,
            lambda_bar: 1.0,
            c1_bar: 0.01,
            c2_bar: 0.1,
            tau_max: 0.1,
        }
    }

    #[test]
    fn max_norm_examples() {
        assert_eq!(max_norm(&Vector3::new(1.0, -3.0, 2.0)), 3.0);
        assert_eq!(max_norm(&Matrix3::<f64>::identity()), 1.0);
        let m = Matrix2::new(1.0, -2.0, 0.0, 3.0);
        assert_eq!(max_norm(&m), 3.0);
        // M² = [[1, -8], [0, 9]]
        assert_eq!(max_norm(&(m * m)), 9.0);
        assert!(max_norm(&(m * m)) <= max_norm(&m) * max_norm(&m));
        let d = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 1.0, 0.5, 0.5, 0.0]);
        assert_eq!(max_norm(&d), 3.0);
    }

    #[test]
    fn p_norm_examples() {
        assert_eq!(p_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(p_norm(&[1.0, 1.0, 1.0], 1.0).unwrap(), 3.0);
        assert!(matches!(p_norm(&[1.0], 0.5), Err(Error::InvalidNormOrder(_))));
        assert!(p_norm(&[1.0], f64::NAN).is_err());
        assert_eq!(p_norm(&[0.0, 0.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn pelican_bounds() {
        let b = derive_bounds(
            &UavParams::default(),
            &StateConstraints::default(),
            &ReferenceBounds::default(),
            &SmcGains::default(),
            &TrackingError::default(),
        );
        assert!((b.i_bar - 1.0).abs() < 1e-15);
        assert!((b.l1_bar - 50.0).abs() < 1e-12);
        assert!((b.l2_bar - 0.047619).abs() < 1e-6);
        assert_eq!(b.z_bar, 0.0);
        assert_eq!(b.lambda_bar, 2.0);
        assert_eq!(b.c1_bar, 0.01);
        assert_eq!(b.c2_bar, 0.5);
        assert_eq!(b.tau_max, 0.1);
        assert_eq!(b.xi2_bar, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn margin_vanishing_terms() {
        let mut b = worked_example();
        b.z_bar = 0.0;
        b.xi3d_bar = 0.0;
        b.xi2_bar = 0.0;
        b.c1_bar = 0.0;
        let f = feasibility_margin(&b);
        assert_eq!(f.lhs, 0.0);
        assert_eq!(f.margin, b.tau_max);
        assert!(f.holds());
    }

    #[test]
    fn worked_margin_example_fails() {
        let f = feasibility_margin(&worked_example());
        assert!((f.lhs - 0.19416).abs() < 1e-4, "lhs = {}", f.lhs);
        assert!((f.margin + 0.094).abs() < 1e-3, "margin = {}", f.margin);
        assert!(!f.holds());
    }

    #[test]
    fn margin_is_monotone_in_gains_and_error() {
        let base = feasibility_margin(&worked_example()).lhs;
        for bump in [
            |b: &mut BoundSet| b.c1_bar *= 2.0,
            |b: &mut BoundSet| b.c2_bar *= 2.0,
            |b: &mut BoundSet| b.z_bar *= 2.0,
            |b: &mut BoundSet| b.lambda_bar *= 2.0,
        ] {
            let mut b = worked_example();
            bump(&mut b);
            assert!(feasibility_margin(&b).lhs >= base);
        }
    }

    #[test]
    fn sliding_bound_examples() {
        let mut b = worked_example();
        b.z_bar = 0.0;
        assert_eq!(smc_bound_proposition2(&b), 0.0);
        b.lambda_bar = 2.0;
        b.z_bar = 0.5;
        assert_eq!(smc_bound_proposition2(&b), 1.5);
    }

    #[test]
    fn empty_log_gives_empty_report() {
        let report = lyapunov_monitor(&TrajectoryLog::default());
        assert!(report.contraction_violations.is_empty());
        assert!(report.increase_violations.is_empty());
        assert_eq!(report.initial_error_norm, None);
        assert_eq!(report.final_error_norm, None);
    }
}
