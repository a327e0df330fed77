use nalgebra::{Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AttitudeState, ControlTorque};
use crate::error::{Error, Result};

/// Default input-disturbance half-width, N·m.
pub const DEFAULT_INPUT_MAGNITUDE: f64 = 0.1;
/// Default measurement-noise variance.
pub const DEFAULT_OUTPUT_VARIANCE: f64 = 0.02;

/// Stream index of the torque-disturbance channel.
pub const INPUT_STREAM: u64 = 1;
/// Stream index of the measurement-noise channel.
pub const OUTPUT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DisturbanceSpec {
    #[default]
    None,
    /// Additive torque noise, uniform on `[−magnitude, magnitude]` per axis,
    /// resampled every control step.
    InputUniform { magnitude: f64 },
    /// Additive zero-mean Gaussian noise on all six measured state components.
    /// The plant keeps integrating the true state.
    OutputGaussian { variance: f64 },
}

impl DisturbanceSpec {
    pub fn default_input() -> Self {
        DisturbanceSpec::InputUniform {
            magnitude: DEFAULT_INPUT_MAGNITUDE,
        }
    }

    pub fn default_output() -> Self {
        DisturbanceSpec::OutputGaussian {
            variance: DEFAULT_OUTPUT_VARIANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (what, v) = match *self {
            DisturbanceSpec::None => return Ok(()),
            DisturbanceSpec::InputUniform { magnitude } => ("magnitude", magnitude),
            DisturbanceSpec::OutputGaussian { variance } => ("variance", variance),
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "disturbance {what} must be finite and >= 0, got {v}"
            )))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DisturbanceSpec::None => "none".into(),
            DisturbanceSpec::InputUniform { magnitude } => format!("input-uniform({magnitude})"),
            DisturbanceSpec::OutputGaussian { variance } => format!("output-gaussian({variance})"),
        }
    }
}

/// Independent ChaCha8 streams, one per disturbance channel, from one seed.
#[derive(Debug, Clone)]
pub struct DisturbanceRng {
    input: ChaCha8Rng,
    output: ChaCha8Rng,
}

impl DisturbanceRng {
    pub fn new(seed: u64) -> Self {
        let mut input = ChaCha8Rng::seed_from_u64(seed);
        input.set_stream(INPUT_STREAM);
        let mut output = ChaCha8Rng::seed_from_u64(seed);
        output.set_stream(OUTPUT_STREAM);
        Self { input, output }
    }
}

/// Returns the disturbed torque and the measured state.
pub fn inject_disturbance(
    spec: &DisturbanceSpec,
    u: &ControlTorque,
    state: &AttitudeState,
    rng: &mut DisturbanceRng,
) -> (ControlTorque, AttitudeState) {
    match *spec {
        DisturbanceSpec::None => (*u, *state),
        DisturbanceSpec::InputUniform { magnitude } => {
            if magnitude == 0.0 {
                return (*u, *state);
            }
            let noise = Vector3::from_fn(|_, _| rng.input.random_range(-magnitude..=magnitude));
            (ControlTorque::new(u.tau + noise), *state)
        }
        DisturbanceSpec::OutputGaussian { variance } => {
            if variance == 0.0 {
                return (*u, *state);
            }
            let normal = Normal::new(0.0, variance.sqrt()).expect("validated variance");
            let noise = Vector6::from_fn(|_, _| normal.sample(&mut rng.output));
            (*u, AttitudeState::from_vector(&(state.to_vector() + noise)))
        }
    }
}
