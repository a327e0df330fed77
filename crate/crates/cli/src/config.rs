//! Flat `key = value` run configuration.
//!
//! One setting per line; `#` starts a comment. Vector-valued keys take either
//! one number (applied to every axis) or the full comma-separated list, and
//! `inf` leaves a limit open. Later lines override earlier ones, and
//! command-line flags override the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lnmpc_core::sim::{ControlSetup, ControllerKind, DisturbanceSpec, ReferencePreview, Scenario};
use lnmpc_core::sim::{DEFAULT_INPUT_MAGNITUDE, DEFAULT_OUTPUT_VARIANCE};
use lnmpc_core::stability::BoundSet;
use nalgebra::SVector;

/// Names accepted under `bounds.`; each replaces the derived certificate input.
pub const BOUND_KEYS: [&str; 14] = [
    "xi1_bar", "xi2_bar", "xi3_bar", "xi1d_bar", "xi2d_bar", "xi3d_bar", "i_bar", "l1_bar",
    "l2_bar", "z_bar", "lambda_bar", "c1_bar", "c2_bar", "tau_max",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// `path:line`, or the flag that carried the setting.
    pub origin: String,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}: {}", self.origin, self.message)
        } else {
            write!(f, "{}: `{}`: {}", self.origin, self.key, self.message)
        }
    }
}

/// Certificate inputs pinned by the user instead of derived.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundOverrides(pub Vec<(String, f64)>);

impl BoundOverrides {
    pub fn apply(&self, mut b: BoundSet) -> BoundSet {
        for (name, v) in &self.0 {
            let slot = match name.as_str() {
                "xi1_bar" => &mut b.xi1_bar,
                "xi2_bar" => &mut b.xi2_bar,
                "xi3_bar" => &mut b.xi3_bar,
                "xi1d_bar" => &mut b.xi1d_bar,
                "xi2d_bar" => &mut b.xi2d_bar,
                "xi3d_bar" => &mut b.xi3d_bar,
                "i_bar" => &mut b.i_bar,
                "l1_bar" => &mut b.l1_bar,
                "l2_bar" => &mut b.l2_bar,
                "z_bar" => &mut b.z_bar,
                "lambda_bar" => &mut b.lambda_bar,
                "c1_bar" => &mut b.c1_bar,
                "c2_bar" => &mut b.c2_bar,
                "tau_max" => &mut b.tau_max,
                _ => unreachable!("bound keys are checked when parsed"),
            };
            *slot = *v;
        }
        b
    }

    fn set(&mut self, name: &str, v: f64) {
        self.0.retain(|(n, _)| n != name);
        self.0.push((name.to_string(), v));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub controllers: Vec<ControllerKind>,
    pub setup: ControlSetup,
    pub seed: u64,
    pub out: PathBuf,
    /// Replaces the scenario's built-in duration.
    pub duration: Option<f64>,
    pub input_magnitude: f64,
    pub output_variance: f64,
    pub bounds: BoundOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            controllers: ControllerKind::ALL.to_vec(),
            setup: ControlSetup::default(),
            seed: 0,
            out: PathBuf::from("out"),
            duration: None,
            input_magnitude: DEFAULT_INPUT_MAGNITUDE,
            output_variance: DEFAULT_OUTPUT_VARIANCE,
            bounds: BoundOverrides::default(),
        }
    }
}

impl RunConfig {
    /// Prediction horizon `T = n_stages · dt`.
    pub fn horizon_length(&self) -> f64 {
        self.setup.horizon.length()
    }

    /// The selected scenario with duration, noise level, and controllers applied.
    pub fn scenario(&self) -> lnmpc_core::Result<Scenario> {
        let mut s = Scenario::from_id(&self.scenario)?;
        if let Some(d) = self.duration {
            s = s.with_duration(d);
        }
        s.disturbance = match s.disturbance {
            DisturbanceSpec::None => DisturbanceSpec::None,
            DisturbanceSpec::InputUniform { .. } => DisturbanceSpec::InputUniform {
                magnitude: self.input_magnitude,
            },
            DisturbanceSpec::OutputGaussian { .. } => DisturbanceSpec::OutputGaussian {
                variance: self.output_variance,
            },
        };
        s.controllers = self.controllers.clone();
        s.validate()?;
        Ok(s)
    }
}

/// Settings given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub controllers: Option<Vec<ControllerKind>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub rti: bool,
    pub duration: Option<f64>,
    /// Raw `key=value` pairs, applied after the file and before the named flags.
    pub set: Vec<String>,
}

/// Reads `path` (if any) and applies `flags` on top.
pub fn load_config(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError {
                origin: p.display().to_string(),
                key: String::new(),
                message: format!("cannot read config: {e}"),
            })?;
            parse_config(&text, &p.display().to_string(), flags)
        }
        None => parse_config("", "<flags>", flags),
    }
}

pub fn parse_config(text: &str, source: &str, flags: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let origin = format!("{source}:{}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_pair(line, &origin)?;
        apply(&mut cfg, key, value, &origin)?;
    }
    for pair in &flags.set {
        let (key, value) = split_pair(pair, "--set")?;
        apply(&mut cfg, key, value, "--set")?;
    }
    if let Some(s) = &flags.scenario {
        apply(&mut cfg, "scenario", s, "--scenario")?;
    }
    if let Some(c) = &flags.controllers {
        if c.is_empty() {
            return Err(err("--controllers", "controllers", "at least one controller is required"));
        }
        cfg.controllers = c.clone();
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &flags.out {
        cfg.out = out.clone();
    }
    if flags.rti {
        cfg.setup.options.rti = true;
    }
    if let Some(d) = flags.duration {
        apply(&mut cfg, "duration", &d.to_string(), "--duration")?;
    }
    if cfg.scenario.is_empty() {
        return Err(err(source, "scenario", "no scenario given (set `scenario` or pass --scenario)"));
    }
    cfg.setup
        .validate()
        .map_err(|e| err(source, "", &e.to_string()))?;
    Ok(cfg)
}

fn err(origin: &str, key: &str, message: &str) -> ConfigError {
    ConfigError {
        origin: origin.to_string(),
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn split_pair<'a>(line: &'a str, origin: &str) -> Result<(&'a str, &'a str), ConfigError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| err(origin, line.trim(), "expected `key = value`"))?;
    Ok((k.trim(), v.trim()))
}

fn number<T: FromStr>(origin: &str, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| err(origin, key, &format!("malformed number `{v}`")))
}

fn real(origin: &str, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = number(origin, key, v)?;
    if x.is_nan() {
        return Err(err(origin, key, "NaN is not allowed"));
    }
    Ok(x)
}

/// One value broadcast to every entry, or exactly `D` comma-separated values.
fn vector<const D: usize>(origin: &str, key: &str, v: &str) -> Result<SVector<f64, D>, ConfigError> {
    let parts = v
        .split(',')
        .map(|p| real(origin, key, p.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    match parts.len() {
        1 => Ok(SVector::repeat(parts[0])),
        n if n == D => Ok(SVector::from_column_slice(&parts)),
        n => Err(err(origin, key, &format!("expected 1 or {D} values, got {n}"))),
    }
}

fn boolean(origin: &str, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(err(origin, key, &format!("expected true or false, got `{v}`"))),
    }
}

fn positive(origin: &str, key: &str, x: f64, requirement: &str) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(err(origin, key, &format!("{x} rejected: {requirement}")))
    }
}

fn positive_vec<const D: usize>(
    origin: &str,
    key: &str,
    v: &str,
    requirement: &str,
) -> Result<SVector<f64, D>, ConfigError> {
    let x = vector::<D>(origin, key, v)?;
    for &e in x.iter() {
        positive(origin, key, e, requirement)?;
    }
    Ok(x)
}

fn limit_vec<const D: usize>(origin: &str, key: &str, v: &str) -> Result<SVector<f64, D>, ConfigError> {
    let x = vector::<D>(origin, key, v)?;
    if let Some(bad) = x.iter().find(|e| **e <= 0.0) {
        return Err(err(origin, key, &format!("{bad} rejected: limits must be > 0 (or inf)")));
    }
    Ok(x)
}

fn apply(cfg: &mut RunConfig, key: &str, v: &str, origin: &str) -> Result<(), ConfigError> {
    let s = &mut cfg.setup;
    match key {
        "scenario" => {
            Scenario::from_id(v).map_err(|e| err(origin, key, &e.to_string()))?;
            cfg.scenario = v.to_string();
        }
        "controllers" => {
            let list = v
                .split(',')
                .map(|c| c.trim().parse::<ControllerKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(origin, key, &e))?;
            if list.is_empty() {
                return Err(err(origin, key, "at least one controller is required"));
            }
            cfg.controllers = list;
        }
        "seed" => cfg.seed = number(origin, key, v)?,
        "out" => cfg.out = PathBuf::from(v),
        "duration" => {
            cfg.duration = Some(positive(origin, key, real(origin, key, v)?, "duration must be > 0")?)
        }
        "uav.ix" | "uav.iy" | "uav.iz" | "uav.la" => {
            let x = positive(origin, key, real(origin, key, v)?, "model parameters must be positive")?;
            match key {
                "uav.ix" => s.params.ix = x,
                "uav.iy" => s.params.iy = x,
                "uav.iz" => s.params.iz = x,
                _ => s.params.la = x,
            }
        }
        "horizon.dt" => {
            s.horizon.dt = positive(origin, key, real(origin, key, v)?, "sampling period must be > 0")?
        }
        "horizon.n_stages" => {
            let n: usize = number(origin, key, v)?;
            if n == 0 {
                return Err(err(origin, key, "the horizon needs at least one stage"));
            }
            s.horizon.n_stages = n;
        }
        "horizon.preview" => {
            s.preview = match v {
                "full" => ReferencePreview::Full,
                "hold_last" => ReferencePreview::HoldLast,
                _ => return Err(err(origin, key, "expected `full` or `hold_last`")),
            }
        }
        "mpc.p" => s.weights.p = positive_vec::<6>(origin, key, v, "weights must be positive")?,
        "mpc.q" => s.weights.q = positive_vec::<6>(origin, key, v, "weights must be positive")?,
        "mpc.r" => s.weights.r = positive_vec::<3>(origin, key, v, "weights must be positive")?,
        "limits.xi_max" => s.constraints.xi_max = limit_vec::<6>(origin, key, v)?,
        "limits.u_max" => s.constraints.u_max = limit_vec::<3>(origin, key, v)?,
        "smc.lambda" => {
            s.smc_gains.lambda =
                positive_vec::<3>(origin, key, v, "the sliding-surface slope must be positive")?
        }
        "smc.c1" => {
            s.smc_gains.c1 = positive_vec::<3>(
                origin,
                key,
                v,
                "c1 must be positive definite for the reaching law to decrease V",
            )?
        }
        "smc.c2" => {
            s.smc_gains.c2 = positive_vec::<3>(
                origin,
                key,
                v,
                "c2 must be positive definite for the reaching law to decrease V",
            )?
        }
        "bsc.k1" => s.bsc_gains.k1 = positive_vec::<3>(origin, key, v, "backstepping gains must be positive")?,
        "bsc.k2" => s.bsc_gains.k2 = positive_vec::<3>(origin, key, v, "backstepping gains must be positive")?,
        "solver.tol" => s.options.tol = positive(origin, key, real(origin, key, v)?, "tolerance must be > 0")?,
        "solver.max_iter" => {
            let n: usize = number(origin, key, v)?;
            if n == 0 {
                return Err(err(origin, key, "at least one iteration is required"));
            }
            s.options.max_iter = n;
        }
        "solver.rti" => s.options.rti = boolean(origin, key, v)?,
        "disturbance.input_magnitude" | "disturbance.output_variance" => {
            let x = real(origin, key, v)?;
            if !(x >= 0.0 && x.is_finite()) {
                return Err(err(origin, key, "noise level must be finite and >= 0"));
            }
            if key.ends_with("magnitude") {
                cfg.input_magnitude = x;
            } else {
                cfg.output_variance = x;
            }
        }
        _ => match key.strip_prefix("bounds.") {
            Some(name) if BOUND_KEYS.contains(&name) => {
                let x = real(origin, key, v)?;
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(err(origin, key, "bounds must be finite and >= 0"));
                }
                cfg.bounds.set(name, x);
            }
            _ => return Err(err(origin, key, "unknown key")),
        },
    }
    Ok(())
}
