use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::DisturbanceSpec;
use crate::controllers::ReferenceSample;
use crate::dynamics::AttitudeState;
use crate::error::{Error, Result};
use crate::stability::ReferenceBounds;

/// Reference shapes. Each variant has closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceProfile {
    /// Constant attitude.
    Hold { target: [f64; 3] },
    /// `(1/3 sin t + 1/2 cos 2t, 1/3 cos t + 1/2 sin 2t, π/10 t + 1/4 cos 2t)`.
    Periodic,
    /// Faster harmonics that push the torques into saturation.
    Aggressive,
    /// Slow quasi-periodic profile used for the disturbance runs.
    Drifting,
}

/// Which controller a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Lnmpc,
    Smc,
    Bsc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Lnmpc, ControllerKind::Smc, ControllerKind::Bsc];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Lnmpc => "lnmpc",
            ControllerKind::Smc => "smc",
            ControllerKind::Bsc => "bsc",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lnmpc" => Ok(ControllerKind::Lnmpc),
            "smc" => Ok(ControllerKind::Smc),
            "bsc" => Ok(ControllerKind::Bsc),
            other => Err(format!("unknown controller `{other}` (expected lnmpc, smc or bsc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Identifier accepted by [`Scenario::from_id`].
    pub name: String,
    pub duration: f64,
    pub profile: ReferenceProfile,
    pub disturbance: DisturbanceSpec,
    pub initial: AttitudeState,
    pub controllers: Vec<ControllerKind>,
}

/// Identifiers accepted by [`Scenario::from_id`].
pub const SCENARIO_IDS: [&str; 6] = ["1", "2", "3", "4-input", "4-output", "hover"];

impl Scenario {
    /// Built-in scenarios: `1` step, `2` periodic tracking, `3` saturating
    /// tracking, `4-input` / `4-output` disturbed tracking, `hover` equilibrium.
    pub fn from_id(id: &str) -> Result<Self> {
        let (duration, profile, disturbance) = match id {
            "1" => (10.0, ReferenceProfile::Hold { target: [1.0; 3] }, DisturbanceSpec::None),
            "2" => (15.0, ReferenceProfile::Periodic, DisturbanceSpec::None),
            "3" => (15.0, ReferenceProfile::Aggressive, DisturbanceSpec::None),
            "4-input" => (15.0, ReferenceProfile::Drifting, DisturbanceSpec::default_input()),
            "4-output" => (15.0, ReferenceProfile::Drifting, DisturbanceSpec::default_output()),
            "hover" => (10.0, ReferenceProfile::Hold { target: [0.0; 3] }, DisturbanceSpec::None),
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        Ok(Self {
            name: id.to_string(),
            duration,
            profile,
            disturbance,
            initial: AttitudeState::zero(),
            controllers: ControllerKind::ALL.to_vec(),
        })
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_disturbance(mut self, disturbance: DisturbanceSpec) -> Self {
        self.disturbance = disturbance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if self.controllers.is_empty() {
            return Err(Error::InvalidScenario("no controller selected".into()));
        }
        if !self.initial.is_finite() {
            return Err(Error::InvalidScenario("initial state is not finite".into()));
        }
        self.disturbance.validate()
    }

    /// Step scenarios have a constant reference; settling and overshoot only apply to them.
    pub fn is_step(&self) -> bool {
        matches!(self.profile, ReferenceProfile::Hold { .. })
    }

    pub fn reference(&self, t: f64) -> ReferenceSample {
        reference_profile(&self.profile, t)
    }

    /// Largest reference angle, rate, and acceleration on the `dt` grid over the run.
    pub fn reference_bounds(&self, dt: f64) -> ReferenceBounds {
        let steps = (self.duration / dt).round() as usize;
        (0..=steps).fold(ReferenceBounds::default(), |b, k| {
            let r = self.reference(k as f64 * dt);
            ReferenceBounds {
                angle: b.angle.max(r.xi1d.amax()),
                rate: b.rate.max(r.xi2d.amax()),
                accel: b.accel.max(r.xi2d_dot.amax()),
            }
        })
    }
}

/// Reference sample of scenario `id` at time `t`.
pub fn reference(id: &str, t: f64) -> Result<ReferenceSample> {
    Ok(Scenario::from_id(id)?.reference(t))
}

/// Evaluates a profile and its first two derivatives at `t`.
pub fn reference_profile(profile: &ReferenceProfile, t: f64) -> ReferenceSample {
    let (s1, c1) = t.sin_cos();
    let (s2, c2) = (2.0 * t).sin_cos();
    match *profile {
        ReferenceProfile::Hold { target } => ReferenceSample::hold(Vector3::from(target)),
        ReferenceProfile::Periodic => ReferenceSample::new(
            Vector3::new(
                s1 / 3.0 + 0.5 * c2,
                c1 / 3.0 + 0.5 * s2,
                PI / 10.0 * t + 0.25 * c2,
            ),
            Vector3::new(c1 / 3.0 - s2, -s1 / 3.0 + c2, PI / 10.0 - 0.5 * s2),
            Vector3::new(-s1 / 3.0 - 2.0 * c2, -c1 / 3.0 - 2.0 * s2, -c2),
        ),
        ReferenceProfile::Aggressive => {
            let (s3, c3) = (3.0 * t).sin_cos();
            let (s4, c4) = (4.0 * t).sin_cos();
            let (s6, c6) = (6.0 * t).sin_cos();
            ReferenceSample::new(
                Vector3::new(
                    s2 / 3.0 + s6 / 6.0,
                    c2 / 3.0 + c4 / 6.0,
                    PI / 10.0 * t + 0.2 * s3 + 0.5,
                ),
                Vector3::new(
                    2.0 / 3.0 * c2 + c6,
                    -2.0 / 3.0 * s2 - 2.0 / 3.0 * s4,
                    PI / 10.0 + 0.6 * c3,
                ),
                Vector3::new(
                    -4.0 / 3.0 * s2 - 6.0 * s6,
                    -4.0 / 3.0 * c2 - 8.0 / 3.0 * c4,
                    -1.8 * s3,
                ),
            )
        }
        ReferenceProfile::Drifting => {
            let (sa, ca) = (2.0 * t / 3.0).sin_cos();
            let (sb, cb) = (0.6 * t).sin_cos();
            ReferenceSample::new(
                Vector3::new(
                    c2 / 3.0 + 0.5 * ca,
                    0.5 * c2 + sa / 6.0,
                    PI / 12.0 * t + cb,
                ),
                Vector3::new(
                    -2.0 / 3.0 * s2 - sa / 3.0,
                    -s2 + ca / 9.0,
                    PI / 12.0 - 0.6 * sb,
                ),
                Vector3::new(
                    -4.0 / 3.0 * c2 - 2.0 / 9.0 * ca,
                    -2.0 * c2 - 2.0 / 27.0 * sa,
                    -0.36 * cb,
                ),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_reference_is_constant() {
        for t in [0.0, 0.3, 9.9] {
            let r = reference("1", t).unwrap();
            assert_eq!(r.xi1d, Vector3::repeat(1.0));
            assert_eq!(r.xi2d, Vector3::zeros());
            assert_eq!(r.xi2d_dot, Vector3::zeros());
        }
    }

    #[test]
    fn periodic_reference_at_zero() {
        let r = reference("2", 0.0).unwrap();
        assert!((r.xi1d.x - 0.5).abs() < 1e-15);
        assert!((r.xi1d.y - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.xi1d.z - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reference_bounds_of_step_and_periodic() {
        let step = Scenario::from_id("1").unwrap().reference_bounds(0.02);
        assert_eq!(step, ReferenceBounds { angle: 1.0, rate: 0.0, accel: 0.0 });
        let periodic = Scenario::from_id("2").unwrap().reference_bounds(0.02);
        assert!(periodic.accel > 2.0 && periodic.accel <= 1.0 / 3.0 + 2.0);
    }

    #[test]
    fn unknown_id_rejected() {
        assert!(matches!(Scenario::from_id("7"), Err(Error::UnknownScenario(_))));
        assert!(reference("nope", 0.0).is_err());
    }

    #[test]
    fn durations_and_validation() {
        assert_eq!(Scenario::from_id("1").unwrap().duration, 10.0);
        for id in ["2", "3", "4-input", "4-output"] {
            assert_eq!(Scenario::from_id(id).unwrap().duration, 15.0);
        }
        let bad = Scenario::from_id("1").unwrap().with_duration(0.0);
        assert!(bad.validate().is_err());
        for id in SCENARIO_IDS {
            Scenario::from_id(id).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn controller_names_round_trip() {
        for c in ControllerKind::ALL {
            assert_eq!(c.as_str().parse::<ControllerKind>().unwrap(), c);
        }
        assert!("pid".parse::<ControllerKind>().is_err());
    }
}
