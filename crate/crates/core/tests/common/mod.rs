#![allow(dead_code)]

pub mod oracles;

use std::f64::consts::FRAC_PI_2;

use lnmpc_core::{AttitudeState, ControlTorque};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample inside the roll/pitch/rate bounds; yaw in [−π, π].
pub fn random_state(rng: &mut ChaCha8Rng) -> AttitudeState {
    let b = FRAC_PI_2;
    AttitudeState::new(
        Vector3::new(
            rng.random_range(-b..b),
            rng.random_range(-b..b),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ),
        Vector3::from_fn(|_, _| rng.random_range(-b..b)),
    )
}

pub fn random_torque(rng: &mut ChaCha8Rng, limit: f64) -> ControlTorque {
    ControlTorque::new(Vector3::from_fn(|_, _| rng.random_range(-limit..limit)))
}

pub fn random_vec3(rng: &mut ChaCha8Rng, limit: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-limit..limit))
}

/// `|a − b| / max(1, |b|)`, the relative error used by the finite-difference checks.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
