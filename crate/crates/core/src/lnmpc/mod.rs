//! Lyapunov-constrained nonlinear model predictive control.
//!
//! The optimal control problem is transcribed by direct multiple shooting
//! with one RK4 step per stage and solved by SQP. Each QP subproblem is
//! condensed onto the control increments and handed to the dense solver in
//! [`qp`]. The stage-0 control must make the sliding-mode Lyapunov function
//! decrease at least as fast as the sliding-mode law itself would.

mod controller;
mod ocp;
pub mod qp;
mod sqp;

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AttitudeState, ControlTorque};
use crate::error::{Error, Result};

pub use controller::{lnmpc_step, Lnmpc, LnmpcConfig, StepDiagnostics, StepOutput};
pub use ocp::{build_ocp, contraction_constraint, evaluate_cost, ContractionData, OcpProblem};
pub use sqp::solve_sqp;

/// Diagonal weights of the tracking cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    /// Terminal state weight.
    pub p: Vector6<f64>,
    /// Stage state weight.
    pub q: Vector6<f64>,
    /// Stage input weight.
    pub r: Vector3<f64>,
}

impl Default for MpcWeights {
    fn default() -> Self {
        let state = Vector6::new(30.0, 30.0, 30.0, 1.0, 1.0, 1.0);
        Self {
            p: state,
            q: state,
            r: Vector3::repeat(1.0),
        }
    }
}

impl MpcWeights {
    pub fn validate(&self) -> Result<()> {
        let entries = self
            .p
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("mpc.p[{i}]"), *v))
            .chain(self.q.iter().enumerate().map(|(i, v)| (format!("mpc.q[{i}]"), *v)))
            .chain(self.r.iter().enumerate().map(|(i, v)| (format!("mpc.r[{i}]"), *v)));
        for (name, value) in entries {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidGain {
                    name,
                    value,
                    requirement: "weight matrices must be positive definite",
                });
            }
        }
        Ok(())
    }
}

/// Symmetric box bounds on the state and torque.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateConstraints {
    /// `|ξ_i| ≤ xi_max[i]`; `+∞` leaves a component unbounded.
    pub xi_max: Vector6<f64>,
    pub u_max: Vector3<f64>,
}

impl Default for StateConstraints {
    /// Roll/pitch and all three rates within ±π/2, yaw free, torques ±0.1 N·m.
    fn default() -> Self {
        Self {
            xi_max: Vector6::new(
                FRAC_PI_2,
                FRAC_PI_2,
                f64::INFINITY,
                FRAC_PI_2,
                FRAC_PI_2,
                FRAC_PI_2,
            ),
            u_max: Vector3::repeat(0.1),
        }
    }
}

impl StateConstraints {
    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.xi_max.iter().enumerate() {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidBound {
                    name: format!("limits.xi_max[{i}]"),
                    value: v,
                });
            }
        }
        for (i, &v) in self.u_max.iter().enumerate() {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidBound {
                    name: format!("limits.u_max[{i}]"),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonConfig {
    /// Sampling period in seconds.
    pub dt: f64,
    pub n_stages: usize,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            n_stages: 30,
        }
    }
}

impl HorizonConfig {
    pub fn new(dt: f64, n_stages: usize) -> Result<Self> {
        let h = Self { dt, n_stages };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidHorizon(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.n_stages == 0 {
            return Err(Error::InvalidHorizon("n_stages must be >= 1".into()));
        }
        Ok(())
    }

    /// Prediction horizon `T = n_stages · dt`.
    pub fn length(&self) -> f64 {
        self.n_stages as f64 * self.dt
    }
}

/// SQP termination settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Tolerance on the KKT residual (∞-norm).
    pub tol: f64,
    pub max_iter: usize,
    /// Real-time iteration: exactly one SQP iteration per call.
    pub rti: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 30,
            rti: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    FallbackSmc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    /// Controls at stages `0..n`.
    pub controls: Vec<ControlTorque>,
    /// Predicted states at stages `0..=n`.
    pub states: Vec<AttitudeState>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl OcpSolution {
    pub fn first_control(&self) -> ControlTorque {
        self.controls[0]
    }
}
