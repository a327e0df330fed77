mod common;

use common::rng;
use lnmpc_core::lnmpc::{build_ocp, contraction_constraint, evaluate_cost, lnmpc_step, solve_sqp};
use lnmpc_core::sim::{ControllerKind, Scenario, run_closed_loop, ControlSetup};
use lnmpc_core::{
    rk4_step, saturate, smc_control, AttitudeState, ControlTorque, Error, HorizonConfig, Lnmpc,
    LnmpcConfig, OcpProblem, OcpSolution, ReferenceSample, SolveStatus, SolverOptions,
};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

fn problem_at(state: &AttitudeState, window: &[ReferenceSample], cfg: &LnmpcConfig) -> OcpProblem {
    build_ocp(
        state,
        window,
        &cfg.weights,
        &cfg.constraints,
        &cfg.smc_gains,
        &cfg.params,
        &cfg.horizon,
    )
    .unwrap()
}

fn scenario_window(id: &str, t: f64, cfg: &LnmpcConfig) -> Vec<ReferenceSample> {
    let sc = Scenario::from_id(id).unwrap();
    (0..=cfg.horizon.n_stages)
        .map(|j| sc.reference(t + j as f64 * cfg.horizon.dt))
        .collect()
}

fn rollout(problem: &OcpProblem, controls: &[ControlTorque]) -> Vec<AttitudeState> {
    let mut states = vec![problem.initial];
    for u in controls {
        let last = *states.last().unwrap();
        states.push(rk4_step(&last, u, &problem.params, problem.horizon.dt));
    }
    states
}

fn check_invariants(problem: &OcpProblem, sol: &OcpSolution) {
    let lim = &problem.constraints;
    for u in &sol.controls {
        for i in 0..3 {
            assert!(u.tau[i].abs() <= lim.u_max[i] + 1e-9);
        }
    }
    if sol.status == SolveStatus::Converged {
        for (j, u) in sol.controls.iter().enumerate() {
            let next = rk4_step(&sol.states[j], u, &problem.params, problem.horizon.dt);
            assert!((next.to_vector() - sol.states[j + 1].to_vector()).amax() <= 1e-8);
        }
        for x in &sol.states {
            let v = x.to_vector();
            for i in 0..6 {
                assert!(v[i].abs() <= lim.xi_max[i] + 1e-6);
            }
        }
        assert!(sol.kkt_residual <= 1e-6);
    }
}

#[test]
fn equilibrium_solution_is_zero() {
    let cfg = LnmpcConfig::default();
    let window = vec![ReferenceSample::default(); cfg.horizon.n_stages + 1];
    let problem = problem_at(&AttitudeState::zero(), &window, &cfg);
    let sol = solve_sqp(&problem, None, &cfg.options);
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!(sol.objective <= 1e-10, "objective {}", sol.objective);
    assert!(sol.controls.iter().all(|u| u.tau.amax() <= 1e-9));
    check_invariants(&problem, &sol);
}

#[test]
fn step_start_respects_contraction_and_bounds() {
    let cfg = LnmpcConfig::default();
    let window = scenario_window("1", 0.0, &cfg);
    let problem = problem_at(&AttitudeState::zero(), &window, &cfg);
    assert_eq!(problem.contraction.s, Vector3::repeat(-2.0));
    let sol = solve_sqp(&problem, None, &cfg.options);
    let (lhs, rhs) = contraction_constraint(&problem, &sol.first_control());
    assert!(lhs <= rhs + 1e-8, "{lhs} > {rhs}");
    assert!(sol.first_control().tau.amax() <= 0.1);
    check_invariants(&problem, &sol);
}

#[test]
fn single_stage_matches_least_squares() {
    // One stage from the origin with s(t_k) = 0: the contraction row vanishes
    // and, for a tiny target, the bounds stay inactive. At the origin RK4 is
    // the exact double integrator, so x₁ = B u with B = [½dt²G₂; dt·G₂].
    let mut cfg = LnmpcConfig::default();
    cfg.horizon = HorizonConfig::new(0.02, 1).unwrap();
    let dt = cfg.horizon.dt;
    let target = ReferenceSample::new(Vector3::new(1e-5, -2e-5, 3e-5), Vector3::new(1e-4, 0.0, -1e-4), Vector3::zeros());
    let window = vec![ReferenceSample::default(), target];
    let problem = problem_at(&AttitudeState::zero(), &window, &cfg);
    let sol = solve_sqp(&problem, None, &cfg.options);
    assert_eq!(sol.status, SolveStatus::Converged);

    let g2 = cfg.params.g2();
    let mut b = DMatrix::zeros(6, 3);
    for i in 0..3 {
        b[(i, i)] = 0.5 * dt * dt * g2[i];
        b[(i + 3, i)] = dt * g2[i];
    }
    let p = DMatrix::from_diagonal(&DVector::from_iterator(6, cfg.weights.p.iter().copied()));
    let r = DMatrix::from_diagonal(&DVector::from_iterator(3, cfg.weights.r.iter().copied()));
    let x_ref = DVector::from_iterator(6, target.state().to_vector().iter().copied());
    // minimize dt·uᵀRu + (Bu − x_ref)ᵀP(Bu − x_ref)
    let lhs = &r * dt + b.transpose() * &p * &b;
    let rhs = b.transpose() * &p * &x_ref;
    let u_star = lhs.lu().solve(&rhs).unwrap();
    for i in 0..3 {
        assert!((sol.controls[0].tau[i] - u_star[i]).abs() <= 1e-8, "{} vs {}", sol.controls[0].tau[i], u_star[i]);
    }
}

#[test]
fn converged_controls_are_locally_optimal() {
    let cfg = LnmpcConfig::default();
    let mut r = rng(3);
    let cases = [
        ("2", 3.0, AttitudeState::new(Vector3::new(0.5, -0.5, 1.18), Vector3::new(-0.05, 0.98, 0.45))),
        ("1", 2.0, AttitudeState::new(Vector3::new(0.95, 1.01, 0.97), Vector3::new(0.1, -0.05, 0.1))),
    ];
    for (id, t, state) in cases {
        let window = scenario_window(id, t, &cfg);
        let problem = problem_at(&state, &window, &cfg);
        let sol = solve_sqp(&problem, None, &cfg.options);
        assert_eq!(sol.status, SolveStatus::Converged, "case {id}");
        let base = evaluate_cost(&problem, &sol.controls, &rollout(&problem, &sol.controls)).unwrap();
        let mut tried = 0;
        while tried < 20 {
            let n = sol.controls.len();
            let dir: Vec<Vector3<f64>> = (0..n).map(|_| Vector3::from_fn(|_, _| r.random_range(-1.0..1.0))).collect();
            let norm = dir.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
            let perturbed: Vec<ControlTorque> = sol
                .controls
                .iter()
                .zip(&dir)
                .map(|(u, d)| ControlTorque::new(u.tau + d * (1e-3 / norm)))
                .collect();
            let states = rollout(&problem, &perturbed);
            let lim = &problem.constraints;
            let in_box = perturbed.iter().all(|u| (0..3).all(|i| u.tau[i].abs() <= lim.u_max[i]))
                && states.iter().all(|x| {
                    let v = x.to_vector();
                    (0..6).all(|i| v[i].abs() <= lim.xi_max[i])
                });
            let (lhs, rhs) = contraction_constraint(&problem, &perturbed[0]);
            if !in_box || lhs > rhs {
                continue;
            }
            tried += 1;
            let cost = evaluate_cost(&problem, &perturbed, &states).unwrap();
            assert!(cost >= base - 1e-8, "case {id}: perturbation lowered cost by {}", base - cost);
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let cfg = LnmpcConfig::default();
    let window = scenario_window("3", 1.0, &cfg);
    let state = AttitudeState::new(Vector3::new(0.3, 0.1, 0.7), Vector3::new(0.4, -0.6, 0.2));
    let problem = problem_at(&state, &window, &cfg);
    let a = solve_sqp(&problem, None, &cfg.options);
    let b = solve_sqp(&problem, None, &cfg.options);
    assert_eq!(a, b);
}

#[test]
fn warm_start_reduces_iterations() {
    let cfg = LnmpcConfig::default();
    let mut warm = Lnmpc::new(cfg);
    let mut state = AttitudeState::zero();
    let (mut it_warm, mut it_cold) = (Vec::new(), Vec::new());
    for k in 0..150 {
        let window = scenario_window("2", k as f64 * cfg.horizon.dt, &cfg);
        let cold = lnmpc_step(&state, &window, &cfg, None).unwrap();
        let out = warm.step(&state, &window).unwrap();
        it_cold.push(cold.diagnostics.iterations);
        it_warm.push(out.diagnostics.iterations);
        state = rk4_step(&state, &out.applied, &cfg.params, cfg.horizon.dt);
    }
    let median = |v: &mut Vec<usize>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let (mw, mc) = (median(&mut it_warm), median(&mut it_cold));
    assert!(mw < mc, "warm median {mw}, cold median {mc}");
}

#[test]
fn rti_mode_runs_one_iteration() {
    let mut cfg = LnmpcConfig::default();
    cfg.options = SolverOptions { rti: true, ..SolverOptions::default() };
    let window = scenario_window("1", 0.0, &cfg);
    let out = lnmpc_step(&AttitudeState::zero(), &window, &cfg, None).unwrap();
    assert_eq!(out.diagnostics.iterations, 1);
    assert!(out.applied.tau.amax() <= 0.1);
}

#[test]
fn infeasible_contraction_falls_back_to_saturated_smc() {
    // s = (2.5, 2.5, 0) while the reference decelerates at 5 rad/s²: every
    // admissible torque gives V̇ > 0.
    let cfg = LnmpcConfig::default();
    let state = AttitudeState::new(Vector3::new(0.5, 0.5, 0.0), Vector3::new(1.5, 1.5, 0.0));
    let r0 = ReferenceSample::new(Vector3::zeros(), Vector3::zeros(), Vector3::new(-5.0, -5.0, 0.0));
    let window = vec![r0; cfg.horizon.n_stages + 1];
    let out = lnmpc_step(&state, &window, &cfg, None).unwrap();
    assert_eq!(out.diagnostics.status, SolveStatus::FallbackSmc);
    let expected = saturate(&smc_control(&state, &r0, &cfg.smc_gains, &cfg.params), &cfg.constraints.u_max);
    assert_eq!(out.applied, expected);
    assert!(out.applied.tau.amax() <= 0.1);
}

#[test]
fn wrong_window_length_is_rejected() {
    let cfg = LnmpcConfig::default();
    let window = vec![ReferenceSample::default(); 5];
    let err = lnmpc_step(&AttitudeState::zero(), &window, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::LengthMismatch { expected: 31, got: 5, .. }));
}

#[test]
fn nominal_runs_keep_state_bounds() {
    let setup = ControlSetup::default();
    let log = run_closed_loop(&Scenario::from_id("1").unwrap(), ControllerKind::Lnmpc, &setup, 0).unwrap();
    for r in &log.records {
        assert!(r.applied.amax() <= 0.1);
        assert!(r.state.xi1.x.abs() <= std::f64::consts::FRAC_PI_2 + 1e-3);
        assert!(r.state.xi1.y.abs() <= std::f64::consts::FRAC_PI_2 + 1e-3);
        assert!(r.state.xi2.amax() <= std::f64::consts::FRAC_PI_2 + 1e-3);
    }
}
