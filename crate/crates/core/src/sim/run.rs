use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    inject_disturbance, ControllerKind, DisturbanceRng, DisturbanceSpec, LogHeader, LogRecord,
    Scenario, TrajectoryLog,
};
use crate::controllers::{
    bsc_control, lyapunov_rate, saturate, sliding_surface, smc_control, smc_guaranteed_rate,
    smc_lyapunov, tracking_error, BscGains, ReferenceSample, SmcGains,
};
use crate::dynamics::{rk4_step, ControlTorque, UavParams};
use crate::error::Result;
use crate::lnmpc::{
    HorizonConfig, Lnmpc, LnmpcConfig, MpcWeights, SolverOptions, StateConstraints,
};

/// How the LNMPC sees the reference beyond the current sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePreview {
    /// The analytic reference at every stage of the horizon.
    #[default]
    Full,
    /// The current sample repeated over the horizon.
    HoldLast,
}

/// Model, limits, and gains shared by every controller in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSetup {
    pub params: UavParams,
    pub horizon: HorizonConfig,
    pub weights: MpcWeights,
    pub constraints: StateConstraints,
    pub smc_gains: SmcGains,
    pub bsc_gains: BscGains,
    pub options: SolverOptions,
    pub preview: ReferencePreview,
}

impl ControlSetup {
    pub fn lnmpc_config(&self) -> LnmpcConfig {
        LnmpcConfig {
            weights: self.weights,
            constraints: self.constraints,
            smc_gains: self.smc_gains,
            params: self.params,
            horizon: self.horizon,
            options: self.options,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.horizon.validate()?;
        self.weights.validate()?;
        self.constraints.validate()?;
        self.smc_gains.validate()?;
        self.bsc_gains.validate()
    }
}

enum Active {
    Lnmpc(Box<Lnmpc>),
    Smc,
    Bsc,
}

struct Command {
    applied: ControlTorque,
    raw: ControlTorque,
    iterations: usize,
    solve_ms: f64,
    status: Option<crate::lnmpc::SolveStatus>,
}

/// Simulates `scenario` under one controller; the plant is advanced on the true state with RK4.
pub fn run_closed_loop(
    scenario: &Scenario,
    controller: ControllerKind,
    setup: &ControlSetup,
    seed: u64,
) -> Result<TrajectoryLog> {
    scenario.validate()?;
    setup.validate()?;
    let dt = setup.horizon.dt;
    let n = setup.horizon.n_stages;
    let steps = (scenario.duration / dt).round() as usize;
    let u_max = setup.constraints.u_max;
    let mut rng = DisturbanceRng::new(seed);
    let mut active = match controller {
        ControllerKind::Lnmpc => Active::Lnmpc(Box::new(Lnmpc::new(setup.lnmpc_config()))),
        ControllerKind::Smc => Active::Smc,
        ControllerKind::Bsc => Active::Bsc,
    };

    let mut state = scenario.initial;
    let mut records = Vec::with_capacity(steps);
    let mut window: Vec<ReferenceSample> = Vec::with_capacity(n + 1);
    for k in 0..steps {
        let t = k as f64 * dt;
        let measured = match scenario.disturbance {
            DisturbanceSpec::OutputGaussian { .. } => {
                inject_disturbance(&scenario.disturbance, &ControlTorque::zero(), &state, &mut rng).1
            }
            _ => state,
        };
        window.clear();
        let reference = scenario.reference(t);
        match setup.preview {
            ReferencePreview::Full => {
                window.extend((0..=n).map(|j| scenario.reference(t + j as f64 * dt)))
            }
            ReferencePreview::HoldLast => window.extend(std::iter::repeat_n(reference, n + 1)),
        }

        let cmd = match &mut active {
            Active::Lnmpc(ctrl) => {
                let out = ctrl.step(&measured, &window)?;
                Command {
                    applied: out.applied,
                    raw: out.solution.first_control(),
                    iterations: out.diagnostics.iterations,
                    solve_ms: out.diagnostics.solve_time.as_secs_f64() * 1e3,
                    status: Some(out.diagnostics.status),
                }
            }
            Active::Smc => {
                let raw = smc_control(&measured, &reference, &setup.smc_gains, &setup.params);
                Command {
                    applied: saturate(&raw, &u_max),
                    raw,
                    iterations: 0,
                    solve_ms: 0.0,
                    status: None,
                }
            }
            Active::Bsc => {
                let raw = bsc_control(&measured, &reference, &setup.bsc_gains, &setup.params);
                Command {
                    applied: saturate(&raw, &u_max),
                    raw,
                    iterations: 0,
                    solve_ms: 0.0,
                    status: None,
                }
            }
        };

        let s = sliding_surface(&tracking_error(&measured, &reference), &setup.smc_gains);
        records.push(LogRecord {
            t,
            state,
            reference,
            applied: cmd.applied.tau,
            raw: cmd.raw.tau,
            v_smc: smc_lyapunov(&s),
            contraction_lhs: lyapunov_rate(
                &measured,
                &reference,
                &cmd.applied,
                &setup.smc_gains,
                &setup.params,
            ),
            contraction_rhs: smc_guaranteed_rate(&s, &setup.smc_gains),
            sqp_iters: cmd.iterations,
            solve_ms: cmd.solve_ms,
            status: cmd.status,
        });

        let plant_u = match scenario.disturbance {
            DisturbanceSpec::InputUniform { .. } => {
                inject_disturbance(&scenario.disturbance, &cmd.applied, &state, &mut rng).0
            }
            _ => cmd.applied,
        };
        state = rk4_step(&state, &plant_u, &setup.params, dt);
    }

    if let Active::Lnmpc(ctrl) = &active {
        if ctrl.fallbacks() > 0 {
            log::info!(
                "scenario {}: {} of {} steps used the sliding-mode fallback",
                scenario.name,
                ctrl.fallbacks(),
                steps
            );
        }
    }

    Ok(TrajectoryLog {
        header: header(scenario, controller, setup, seed),
        records,
    })
}

fn header(scenario: &Scenario, controller: ControllerKind, setup: &ControlSetup, seed: u64) -> LogHeader {
    let v3 = |v: &Vector3<f64>| format!("{},{},{}", v.x, v.y, v.z);
    let g = &setup.smc_gains;
    LogHeader {
        scenario: scenario.name.clone(),
        controller: controller.to_string(),
        seed,
        dt: setup.horizon.dt,
        u_max: [setup.constraints.u_max.x, setup.constraints.u_max.y, setup.constraints.u_max.z],
        extra: vec![
            ("duration".into(), scenario.duration.to_string()),
            ("disturbance".into(), scenario.disturbance.label()),
            ("horizon.n".into(), setup.horizon.n_stages.to_string()),
            ("smc.lambda".into(), v3(&g.lambda)),
            ("smc.c1".into(), v3(&g.c1)),
            ("smc.c2".into(), v3(&g.c2)),
            ("bsc.k1".into(), v3(&setup.bsc_gains.k1)),
            ("bsc.k2".into(), v3(&setup.bsc_gains.k2)),
            ("solver.rti".into(), setup.options.rti.to_string()),
            ("horizon.preview".into(), format!("{:?}", setup.preview)),
        ],
    }
}

/// Tracking error at `t = 0`, the `Z(0)` of the stability bounds.
pub fn initial_error(scenario: &Scenario) -> crate::controllers::TrackingError {
    tracking_error(&scenario.initial, &scenario.reference(0.0))
}

