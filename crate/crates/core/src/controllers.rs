//! Sliding-mode attitude controller, its Lyapunov function, and a
//! backstepping baseline.
//!
//! The sliding-mode law doubles as the auxiliary controller `h(ξ)` that
//! certifies the predictive controller's contraction constraint.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{gyro_coupling, AttitudeState, ControlTorque, UavParams};
use crate::error::{Error, Result};

fn check_positive(name: &str, diag: &Vector3<f64>, requirement: &'static str) -> Result<()> {
    for (i, &v) in diag.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidGain {
                name: format!("{name}[{i}]"),
                value: v,
                requirement,
            });
        }
    }
    Ok(())
}

/// Diagonal gains of the sliding-mode controller. Each field holds the
/// diagonal of the corresponding 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcGains {
    /// Sliding-surface slope λ.
    pub lambda: Vector3<f64>,
    /// Switching gain c₁ multiplying `sign(s)`.
    pub c1: Vector3<f64>,
    /// Proportional reaching gain c₂ multiplying `s`.
    pub c2: Vector3<f64>,
}

impl Default for SmcGains {
    fn default() -> Self {
        Self {
            lambda: Vector3::repeat(DEFAULT_LAMBDA),
            c1: Vector3::repeat(DEFAULT_C1),
            c2: Vector3::repeat(DEFAULT_C2),
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 2.0;
pub const DEFAULT_C1: f64 = 0.01;
pub const DEFAULT_C2: f64 = 0.5;

impl SmcGains {
    pub fn new(lambda: Vector3<f64>, c1: Vector3<f64>, c2: Vector3<f64>) -> Result<Self> {
        let gains = Self { lambda, c1, c2 };
        gains.validate()?;
        Ok(gains)
    }

    pub fn uniform(lambda: f64, c1: f64, c2: f64) -> Result<Self> {
        Self::new(Vector3::repeat(lambda), Vector3::repeat(c1), Vector3::repeat(c2))
    }

    pub fn validate(&self) -> Result<()> {
        check_positive(
            "smc.lambda",
            &self.lambda,
            "the sliding-surface gain λ must be a positive diagonal matrix",
        )?;
        check_positive(
            "smc.c1",
            &self.c1,
            "c1 must be a positive diagonal matrix (switching-gain positivity)",
        )?;
        check_positive(
            "smc.c2",
            &self.c2,
            "c2 must be a positive diagonal matrix (reaching-gain positivity)",
        )
    }
}

/// Diagonal gains of the backstepping baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BscGains {
    pub k1: Vector3<f64>,
    pub k2: Vector3<f64>,
}

impl Default for BscGains {
    fn default() -> Self {
        Self {
            k1: Vector3::repeat(3.0),
            k2: Vector3::repeat(3.0),
        }
    }
}

impl BscGains {
    pub fn new(k1: Vector3<f64>, k2: Vector3<f64>) -> Result<Self> {
        let gains = Self { k1, k2 };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("bsc.k1", &self.k1, "backstepping gains must be positive")?;
        check_positive("bsc.k2", &self.k2, "backstepping gains must be positive")
    }
}

/// Desired attitude, rates, and accelerations at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub xi1d: Vector3<f64>,
    pub xi2d: Vector3<f64>,
    pub xi2d_dot: Vector3<f64>,
}

impl ReferenceSample {
    pub fn new(xi1d: Vector3<f64>, xi2d: Vector3<f64>, xi2d_dot: Vector3<f64>) -> Self {
        Self {
            xi1d,
            xi2d,
            xi2d_dot,
        }
    }

    /// Constant attitude with zero derivatives.
    pub fn hold(xi1d: Vector3<f64>) -> Self {
        Self::new(xi1d, Vector3::zeros(), Vector3::zeros())
    }

    /// The reference as a stacked 6-vector `(ξ₁d, ξ₂d)`.
    pub fn state(&self) -> AttitudeState {
        AttitudeState::new(self.xi1d, self.xi2d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    pub z1: Vector3<f64>,
    pub z2: Vector3<f64>,
}

impl TrackingError {
    /// Euclidean norm of the stacked error `Z = (z₁, z₂)`.
    pub fn norm(&self) -> f64 {
        (self.z1.norm_squared() + self.z2.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlidingValue {
    pub s: Vector3<f64>,
}

pub fn tracking_error(state: &AttitudeState, reference: &ReferenceSample) -> TrackingError {
    TrackingError {
        z1: state.xi1 - reference.xi1d,
        z2: state.xi2 - reference.xi2d,
    }
}

/// `s = z₂ + λ·z₁`.
pub fn sliding_surface(err: &TrackingError, gains: &SmcGains) -> SlidingValue {
    SlidingValue {
        s: err.z2 + gains.lambda.component_mul(&err.z1),
    }
}

/// Componentwise sign with `sign(0) = 0`.
pub fn sign0(v: &Vector3<f64>) -> Vector3<f64> {
    v.map(|x| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Equivalent plus switching control, `U_eq + U_sw`. No saturation.
pub fn smc_control(
    state: &AttitudeState,
    reference: &ReferenceSample,
    gains: &SmcGains,
    params: &UavParams,
) -> ControlTorque {
    let err = tracking_error(state, reference);
    let s = sliding_surface(&err, gains).s;
    let g2_inv = params.g2_inv();
    let coupling = params.g1().component_mul(&gyro_coupling(&state.xi2));
    let u_eq = g2_inv
        .component_mul(&(reference.xi2d_dot - gains.lambda.component_mul(&err.z2) - coupling));
    let u_sw = -g2_inv
        .component_mul(&(gains.c1.component_mul(&sign0(&s)) + gains.c2.component_mul(&s)));
    ControlTorque::new(u_eq + u_sw)
}

/// `V = ½ sᵀs`.
pub fn smc_lyapunov(s: &SlidingValue) -> f64 {
    0.5 * s.s.norm_squared()
}

/// Time derivative of the sliding-mode Lyapunov function under torque `u`:
/// `sᵀ(G₁g(ξ₂) + G₂U − ξ̇₂d + λz₂)`.
pub fn lyapunov_rate(
    state: &AttitudeState,
    reference: &ReferenceSample,
    u: &ControlTorque,
    gains: &SmcGains,
    params: &UavParams,
) -> f64 {
    let err = tracking_error(state, reference);
    let s = sliding_surface(&err, gains).s;
    s.dot(&sliding_rate(state, reference, u, gains, params))
}

/// `ṡ` under torque `u`.
pub fn sliding_rate(
    state: &AttitudeState,
    reference: &ReferenceSample,
    u: &ControlTorque,
    gains: &SmcGains,
    params: &UavParams,
) -> Vector3<f64> {
    let err = tracking_error(state, reference);
    params.g1().component_mul(&gyro_coupling(&state.xi2)) + params.g2().component_mul(&u.tau)
        - reference.xi2d_dot
        + gains.lambda.component_mul(&err.z2)
}

/// Decrease rate the sliding-mode law guarantees: `−sᵀ(c₁·sign(s) + c₂·s)`.
pub fn smc_guaranteed_rate(s: &SlidingValue, gains: &SmcGains) -> f64 {
    -s.s
        .dot(&(gains.c1.component_mul(&sign0(&s.s)) + gains.c2.component_mul(&s.s)))
}

/// Integrator backstepping. Virtual rate `α = ξ₂d − k₁z₁`, second error
/// `e₂ = ξ₂ − α`, torque `G₂⁻¹(ξ̇₂d − k₁z₂ − z₁ − k₂e₂ − G₁g(ξ₂))`.
pub fn bsc_control(
    state: &AttitudeState,
    reference: &ReferenceSample,
    gains: &BscGains,
    params: &UavParams,
) -> ControlTorque {
    let err = tracking_error(state, reference);
    let e2 = bsc_second_error(state, reference, gains);
    let coupling = params.g1().component_mul(&gyro_coupling(&state.xi2));
    let accel = reference.xi2d_dot
        - gains.k1.component_mul(&err.z2)
        - err.z1
        - gains.k2.component_mul(&e2)
        - coupling;
    ControlTorque::new(params.g2_inv().component_mul(&accel))
}

/// `e₂ = ξ₂ − (ξ₂d − k₁z₁) = z₂ + k₁z₁`.
pub fn bsc_second_error(
    state: &AttitudeState,
    reference: &ReferenceSample,
    gains: &BscGains,
) -> Vector3<f64> {
    let err = tracking_error(state, reference);
    err.z2 + gains.k1.component_mul(&err.z1)
}

/// Symmetric componentwise clamp into `[−u_max, u_max]`.
pub fn saturate(u: &ControlTorque, u_max: &Vector3<f64>) -> ControlTorque {
    ControlTorque::new(u.tau.zip_map(u_max, |v, m| v.clamp(-m, m)))
}
