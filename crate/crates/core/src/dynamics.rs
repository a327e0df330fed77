//! Rotational dynamics of a quadrotor in roll/pitch/yaw coordinates.
//!
//! The model is the decoupled attitude subsystem
//!
//! ```text
//! ξ̇₁ = ξ₂
//! ξ̇₂ = G₁·g(ξ₂) + G₂·U,   g(ξ₂) = (θ̇ψ̇, φ̇ψ̇, φ̇θ̇)
//! ```
//!
//! with `G₁ = diag((Iy−Iz)/Ix, (Iz−Ix)/Iy, (Ix−Iy)/Iz)` and
//! `G₂ = diag(la/Ix, la/Iy, 1/Iz)`. Angles are never wrapped.

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inertial and geometric parameters of the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavParams {
    /// Moment of inertia about the body x axis, kg·m².
    pub ix: f64,
    /// Moment of inertia about the body y axis, kg·m².
    pub iy: f64,
    /// Moment of inertia about the body z axis, kg·m².
    pub iz: f64,
    /// Arm length, m.
    pub la: f64,
}

impl Default for UavParams {
    /// AscTec Pelican values.
    fn default() -> Self {
        Self {
            ix: 0.01,
            iy: 0.01,
            iz: 0.02,
            la: 0.21,
        }
    }
}

impl UavParams {
    pub fn new(ix: f64, iy: f64, iz: f64, la: f64) -> Result<Self> {
        let params = Self { ix, iy, iz, la };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("ix", self.ix), ("iy", self.iy), ("iz", self.iz), ("la", self.la)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// Diagonal of the gyroscopic coupling matrix G₁.
    pub fn g1(&self) -> Vector3<f64> {
        Vector3::new(
            (self.iy - self.iz) / self.ix,
            (self.iz - self.ix) / self.iy,
            (self.ix - self.iy) / self.iz,
        )
    }

    /// Diagonal of the input matrix G₂.
    pub fn g2(&self) -> Vector3<f64> {
        Vector3::new(self.la / self.ix, self.la / self.iy, 1.0 / self.iz)
    }

    /// Diagonal of G₂⁻¹.
    pub fn g2_inv(&self) -> Vector3<f64> {
        Vector3::new(self.ix / self.la, self.iy / self.la, self.iz)
    }

    pub fn g1_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.g1())
    }

    pub fn g2_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.g2())
    }

    pub fn g2_inv_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.g2_inv())
    }
}

/// Stacked attitude state `(ξ₁, ξ₂)`: Euler angles and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttitudeState {
    /// Roll, pitch, yaw in rad.
    pub xi1: Vector3<f64>,
    /// Roll, pitch, yaw rates in rad/s.
    pub xi2: Vector3<f64>,
}

impl AttitudeState {
    pub fn new(xi1: Vector3<f64>, xi2: Vector3<f64>) -> Self {
        Self { xi1, xi2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            xi1: x.fixed_rows::<3>(0).into_owned(),
            xi2: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut x = Vector6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.xi1);
        x.fixed_rows_mut::<3>(3).copy_from(&self.xi2);
        x
    }

    pub fn is_finite(&self) -> bool {
        self.xi1.iter().chain(self.xi2.iter()).all(|v| v.is_finite())
    }
}

/// Body torques `(τφ, τθ, τψ)` in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlTorque {
    pub tau: Vector3<f64>,
}

impl ControlTorque {
    pub fn new(tau: Vector3<f64>) -> Self {
        Self { tau }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.tau.iter().all(|v| v.is_finite())
    }
}

impl From<Vector3<f64>> for ControlTorque {
    fn from(tau: Vector3<f64>) -> Self {
        Self { tau }
    }
}

/// Gyroscopic product vector `g(ξ₂) = (θ̇ψ̇, φ̇ψ̇, φ̇θ̇)`.
pub fn gyro_coupling(xi2: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(xi2[1] * xi2[2], xi2[0] * xi2[2], xi2[0] * xi2[1])
}

fn derivative_vec(x: &Vector6<f64>, u: &Vector3<f64>, params: &UavParams) -> Vector6<f64> {
    let rates = x.fixed_rows::<3>(3).into_owned();
    let accel = params.g1().component_mul(&gyro_coupling(&rates)) + params.g2().component_mul(u);
    let mut dx = Vector6::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&rates);
    dx.fixed_rows_mut::<3>(3).copy_from(&accel);
    dx
}

fn jacobians_vec(x: &Vector6<f64>, params: &UavParams) -> (Matrix6<f64>, Matrix6x3<f64>) {
    let (p, q, r) = (x[3], x[4], x[5]);
    let g1 = params.g1();
    let dg = Matrix3::new(0.0, r, q, r, 0.0, p, q, p, 0.0);
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::from_diagonal(&g1) * dg));
    let mut b = Matrix6x3::zeros();
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&params.g2_matrix());
    (a, b)
}

/// Continuous-time state derivative `ξ̇ = f(ξ, U)`.
pub fn attitude_derivative(
    state: &AttitudeState,
    u: &ControlTorque,
    params: &UavParams,
) -> Vector6<f64> {
    derivative_vec(&state.to_vector(), &u.tau, params)
}

/// Exact Jacobians `(∂f/∂ξ, ∂f/∂U)` of [`attitude_derivative`].
pub fn dynamics_jacobians(
    state: &AttitudeState,
    _u: &ControlTorque,
    params: &UavParams,
) -> (Matrix6<f64>, Matrix6x3<f64>) {
    jacobians_vec(&state.to_vector(), params)
}

/// One classical Runge–Kutta step with the torque held over `dt`.
pub fn rk4_step(
    state: &AttitudeState,
    u: &ControlTorque,
    params: &UavParams,
    dt: f64,
) -> AttitudeState {
    AttitudeState::from_vector(&rk4_vec(&state.to_vector(), &u.tau, params, dt))
}

pub(crate) fn rk4_vec(
    x: &Vector6<f64>,
    u: &Vector3<f64>,
    params: &UavParams,
    dt: f64,
) -> Vector6<f64> {
    let k1 = derivative_vec(x, u, params);
    let k2 = derivative_vec(&(x + k1 * (0.5 * dt)), u, params);
    let k3 = derivative_vec(&(x + k2 * (0.5 * dt)), u, params);
    let k4 = derivative_vec(&(x + k3 * dt), u, params);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// RK4 step together with its exact discrete Jacobians `(A_k, B_k)`,
/// obtained by differentiating every stage.
pub fn rk4_step_sensitivities(
    state: &AttitudeState,
    u: &ControlTorque,
    params: &UavParams,
    dt: f64,
) -> (AttitudeState, Matrix6<f64>, Matrix6x3<f64>) {
    let (next, a, b) = rk4_sens_vec(&state.to_vector(), &u.tau, params, dt);
    (AttitudeState::from_vector(&next), a, b)
}

pub(crate) fn rk4_sens_vec(
    x: &Vector6<f64>,
    u: &Vector3<f64>,
    params: &UavParams,
    dt: f64,
) -> (Vector6<f64>, Matrix6<f64>, Matrix6x3<f64>) {
    let eye = Matrix6::<f64>::identity();
    let h = 0.5 * dt;

    let k1 = derivative_vec(x, u, params);
    let (a1, b1) = jacobians_vec(x, params);
    let dk1_dx = a1;
    let dk1_du = b1;

    let x2 = x + k1 * h;
    let k2 = derivative_vec(&x2, u, params);
    let (a2, b2) = jacobians_vec(&x2, params);
    let dk2_dx = a2 * (eye + dk1_dx * h);
    let dk2_du = a2 * dk1_du * h + b2;

    let x3 = x + k2 * h;
    let k3 = derivative_vec(&x3, u, params);
    let (a3, b3) = jacobians_vec(&x3, params);
    let dk3_dx = a3 * (eye + dk2_dx * h);
    let dk3_du = a3 * dk2_du * h + b3;

    let x4 = x + k3 * dt;
    let k4 = derivative_vec(&x4, u, params);
    let (a4, b4) = jacobians_vec(&x4, params);
    let dk4_dx = a4 * (eye + dk3_dx * dt);
    let dk4_du = a4 * dk3_du * dt + b4;

    let w = dt / 6.0;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * w;
    let a = eye + (dk1_dx + dk2_dx * 2.0 + dk3_dx * 2.0 + dk4_dx) * w;
    let b = (dk1_du + dk2_du * 2.0 + dk3_du * 2.0 + dk4_du) * w;
    (next, a, b)
}
