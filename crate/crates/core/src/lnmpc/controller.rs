use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    build_ocp, contraction_constraint, solve_sqp, HorizonConfig, MpcWeights, OcpSolution,
    SolveStatus, SolverOptions, StateConstraints,
};
use crate::controllers::{saturate, ReferenceSample, SmcGains};
use crate::dynamics::{AttitudeState, ControlTorque, UavParams};
use crate::error::Result;

/// Everything the predictive controller needs besides the state and reference.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LnmpcConfig {
    pub weights: MpcWeights,
    pub constraints: StateConstraints,
    pub smc_gains: SmcGains,
    pub params: UavParams,
    pub horizon: HorizonConfig,
    pub options: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Contraction left-hand side evaluated at the applied torque.
    pub contraction_lhs: f64,
    pub contraction_rhs: f64,
    pub solve_time: Duration,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub applied: ControlTorque,
    pub solution: OcpSolution,
    pub diagnostics: StepDiagnostics,
}

/// One receding-horizon step: build, solve, and apply the stage-0 torque.
pub fn lnmpc_step(
    state: &AttitudeState,
    ref_window: &[ReferenceSample],
    config: &LnmpcConfig,
    previous: Option<&OcpSolution>,
) -> Result<StepOutput> {
    let started = Instant::now();
    let problem = build_ocp(
        state,
        ref_window,
        &config.weights,
        &config.constraints,
        &config.smc_gains,
        &config.params,
        &config.horizon,
    )?;
    let solution = solve_sqp(&problem, previous, &config.options);
    let solve_time = started.elapsed();
    // The QP already honours the bounds to solver precision; the clamp makes them exact.
    let applied = saturate(&solution.first_control(), &config.constraints.u_max);
    let (contraction_lhs, contraction_rhs) = contraction_constraint(&problem, &applied);
    let diagnostics = StepDiagnostics {
        contraction_lhs,
        contraction_rhs,
        solve_time,
        iterations: solution.iterations,
        status: solution.status,
    };
    Ok(StepOutput {
        applied,
        solution,
        diagnostics,
    })
}

/// Stateful wrapper that keeps the previous solution for warm starting.
#[derive(Debug, Clone)]
pub struct Lnmpc {
    config: LnmpcConfig,
    previous: Option<OcpSolution>,
    fallbacks: usize,
}

impl Lnmpc {
    pub fn new(config: LnmpcConfig) -> Self {
        Self {
            config,
            previous: None,
            fallbacks: 0,
        }
    }

    pub fn config(&self) -> &LnmpcConfig {
        &self.config
    }

    /// Number of steps so far that fell back to the sliding-mode law.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.fallbacks = 0;
    }

    pub fn step(
        &mut self,
        state: &AttitudeState,
        ref_window: &[ReferenceSample],
    ) -> Result<StepOutput> {
        let out = lnmpc_step(state, ref_window, &self.config, self.previous.as_ref())?;
        if out.solution.status == SolveStatus::FallbackSmc {
            self.fallbacks += 1;
            log::debug!("QP infeasible; applied saturated sliding-mode torque");
        }
        self.previous = Some(out.solution.clone());
        Ok(out)
    }
}
