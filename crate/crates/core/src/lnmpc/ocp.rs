use nalgebra::{Vector3, Vector6};

use super::{HorizonConfig, MpcWeights, StateConstraints};
use crate::controllers::{
    sign0, sliding_surface, tracking_error, ReferenceSample, SmcGains,
};
use crate::dynamics::{gyro_coupling, AttitudeState, ControlTorque, UavParams};
use crate::error::{Error, Result};

/// Stage-0 quantities entering the contraction constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionData {
    /// Sliding value `s(t_k)`.
    pub s: Vector3<f64>,
    pub lambda: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
    /// `G₁·g(ξ₂(t_k))`.
    pub coupling: Vector3<f64>,
    /// `ξ̇₂d(t_k)`.
    pub xi2d_dot: Vector3<f64>,
    /// `z₂(t_k)`.
    pub z2: Vector3<f64>,
    /// Diagonal of `G₂`.
    pub g2: Vector3<f64>,
}

impl ContractionData {
    /// Gradient of the constraint's left-hand side with respect to `u0`: `G₂ᵀs`.
    pub fn gradient(&self) -> Vector3<f64> {
        self.g2.component_mul(&self.s)
    }

    /// Part of the left-hand side that does not depend on `u0`.
    pub fn drift(&self) -> f64 {
        self.s
            .dot(&(self.coupling - self.xi2d_dot + self.lambda.component_mul(&self.z2)))
    }

    /// `−sᵀ(c₁·sign(s) + c₂·s)`.
    pub fn rhs(&self) -> f64 {
        -self
            .s
            .dot(&(self.c1.component_mul(&sign0(&self.s)) + self.c2.component_mul(&self.s)))
    }
}

/// One receding-horizon optimal control problem.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub initial: AttitudeState,
    /// Reference at stages `0..=n_stages`.
    pub reference: Vec<ReferenceSample>,
    pub weights: MpcWeights,
    pub constraints: StateConstraints,
    pub contraction: ContractionData,
    pub smc_gains: SmcGains,
    pub params: UavParams,
    pub horizon: HorizonConfig,
}

impl OcpProblem {
    pub fn n_stages(&self) -> usize {
        self.horizon.n_stages
    }
}

pub fn build_ocp(
    state: &AttitudeState,
    ref_window: &[ReferenceSample],
    weights: &MpcWeights,
    constraints: &StateConstraints,
    smc_gains: &SmcGains,
    params: &UavParams,
    horizon: &HorizonConfig,
) -> Result<OcpProblem> {
    params.validate()?;
    horizon.validate()?;
    smc_gains.validate()?;
    weights.validate()?;
    constraints.validate()?;
    if ref_window.len() != horizon.n_stages + 1 {
        return Err(Error::LengthMismatch {
            what: "reference samples",
            expected: horizon.n_stages + 1,
            got: ref_window.len(),
        });
    }
    let r0 = &ref_window[0];
    let err = tracking_error(state, r0);
    let s = sliding_surface(&err, smc_gains).s;
    let contraction = ContractionData {
        s,
        lambda: smc_gains.lambda,
        c1: smc_gains.c1,
        c2: smc_gains.c2,
        coupling: params.g1().component_mul(&gyro_coupling(&state.xi2)),
        xi2d_dot: r0.xi2d_dot,
        z2: err.z2,
        g2: params.g2(),
    };
    Ok(OcpProblem {
        initial: *state,
        reference: ref_window.to_vec(),
        weights: *weights,
        constraints: *constraints,
        contraction,
        smc_gains: *smc_gains,
        params: *params,
        horizon: *horizon,
    })
}

fn weighted_sq(e: &Vector6<f64>, w: &Vector6<f64>) -> f64 {
    e.component_mul(e).dot(w)
}

/// Discrete tracking cost: stage terms scaled by `dt` plus the terminal term.
pub fn evaluate_cost(
    problem: &OcpProblem,
    controls: &[ControlTorque],
    states: &[AttitudeState],
) -> Result<f64> {
    let n = problem.n_stages();
    if controls.len() != n {
        return Err(Error::LengthMismatch {
            what: "controls",
            expected: n,
            got: controls.len(),
        });
    }
    if states.len() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "states",
            expected: n + 1,
            got: states.len(),
        });
    }
    let w = &problem.weights;
    let dt = problem.horizon.dt;
    let mut cost = 0.0;
    for j in 0..n {
        let e = states[j].to_vector() - problem.reference[j].state().to_vector();
        let u = &controls[j].tau;
        cost += (weighted_sq(&e, &w.q) + u.component_mul(u).dot(&w.r)) * dt;
    }
    let e = states[n].to_vector() - problem.reference[n].state().to_vector();
    Ok(cost + weighted_sq(&e, &w.p))
}

/// Returns `(lhs, rhs)`; the constraint holds iff `lhs ≤ rhs`.
pub fn contraction_constraint(problem: &OcpProblem, u0: &ControlTorque) -> (f64, f64) {
    let c = &problem.contraction;
    let lhs = c.drift() + c.gradient().dot(&u0.tau);
    (lhs, c.rhs())
}
