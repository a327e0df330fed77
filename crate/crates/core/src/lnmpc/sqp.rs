use nalgebra::{DMatrix, DVector, Matrix6, Matrix6x3, Vector3, Vector6};

use super::qp::{solve_qp, QpProblem};
use super::{evaluate_cost, OcpProblem, OcpSolution, SolveStatus, SolverOptions};
use crate::controllers::{saturate, smc_control};
use crate::dynamics::{rk4_sens_vec, rk4_vec, AttitudeState, ControlTorque};

/// Defect tolerance required before a solve counts as converged.
const DEFECT_TOL: f64 = 1e-8;

#[derive(Clone)]
struct Iterate {
    /// `u_0..u_{n-1}`.
    u: Vec<Vector3<f64>>,
    /// `x_0..x_n`; `x_0` is pinned to the initial state.
    x: Vec<Vector6<f64>>,
}

fn smc_rollout(problem: &OcpProblem) -> Iterate {
    let n = problem.n_stages();
    let dt = problem.horizon.dt;
    let mut x = Vec::with_capacity(n + 1);
    let mut u = Vec::with_capacity(n);
    x.push(problem.initial.to_vector());
    for j in 0..n {
        let state = AttitudeState::from_vector(&x[j]);
        let raw = smc_control(&state, &problem.reference[j], &problem.smc_gains, &problem.params);
        let uj = saturate(&raw, &problem.constraints.u_max).tau;
        x.push(rk4_vec(&x[j], &uj, &problem.params, dt));
        u.push(uj);
    }
    Iterate { u, x }
}

fn shifted(problem: &OcpProblem, prev: &OcpSolution) -> Option<Iterate> {
    let n = problem.n_stages();
    if prev.controls.len() != n || prev.states.len() != n + 1 {
        return None;
    }
    let u: Vec<_> = (0..n).map(|j| prev.controls[(j + 1).min(n - 1)].tau).collect();
    let mut x: Vec<_> = (0..=n).map(|j| prev.states[(j + 1).min(n)].to_vector()).collect();
    x[0] = problem.initial.to_vector();
    Some(Iterate { u, x })
}

fn to_solution(
    problem: &OcpProblem,
    it: &Iterate,
    kkt_residual: f64,
    iterations: usize,
    status: SolveStatus,
) -> OcpSolution {
    // The QP meets the bounds to rounding; clamp so they hold exactly.
    let controls: Vec<_> = it
        .u
        .iter()
        .map(|u| saturate(&ControlTorque::new(*u), &problem.constraints.u_max))
        .collect();
    let states: Vec<_> = it.x.iter().map(AttitudeState::from_vector).collect();
    let objective = evaluate_cost(problem, &controls, &states).unwrap_or(f64::NAN);
    OcpSolution {
        controls,
        states,
        objective,
        kkt_residual,
        iterations,
        status,
    }
}

fn max_defect(problem: &OcpProblem, it: &Iterate) -> f64 {
    let dt = problem.horizon.dt;
    (0..problem.n_stages())
        .map(|j| (rk4_vec(&it.x[j], &it.u[j], &problem.params, dt) - it.x[j + 1]).amax())
        .fold(0.0, f64::max)
}

/// Condensed QP in the control increments, plus the affine map
/// `Δx_j = S_j Δu + r_j` needed to lift the step back onto the states.
struct Condensed {
    qp: QpProblem,
    sens: Vec<DMatrix<f64>>,
    offset: Vec<Vector6<f64>>,
}

fn condense(problem: &OcpProblem, it: &Iterate) -> Condensed {
    let n = problem.n_stages();
    let nu = 3 * n;
    let dt = problem.horizon.dt;
    let params = &problem.params;
    let w = &problem.weights;
    let lim = &problem.constraints;

    let mut a_mats: Vec<Matrix6<f64>> = Vec::with_capacity(n);
    let mut b_mats: Vec<Matrix6x3<f64>> = Vec::with_capacity(n);
    let mut defects: Vec<Vector6<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let (next, a, b) = rk4_sens_vec(&it.x[j], &it.u[j], params, dt);
        a_mats.push(a);
        b_mats.push(b);
        defects.push(next - it.x[j + 1]);
    }

    // S_j only has nonzero columns 0..3j.
    let mut sens = Vec::with_capacity(n + 1);
    let mut offset = Vec::with_capacity(n + 1);
    sens.push(DMatrix::<f64>::zeros(6, nu));
    offset.push(Vector6::zeros());
    for j in 0..n {
        let prev = &sens[j];
        let mut next = DMatrix::<f64>::zeros(6, nu);
        let width = 3 * j;
        if width > 0 {
            let a_dyn = DMatrix::from_iterator(6, 6, a_mats[j].iter().copied());
            let block = &a_dyn * prev.columns(0, width);
            next.columns_mut(0, width).copy_from(&block);
        }
        for r in 0..6 {
            for c in 0..3 {
                next[(r, width + c)] = b_mats[j][(r, c)];
            }
        }
        sens.push(next);
        offset.push(a_mats[j] * offset[j] + defects[j]);
    }

    let mut hessian = DMatrix::<f64>::zeros(nu, nu);
    let mut linear = DVector::<f64>::zeros(nu);
    for j in 1..=n {
        let weight = if j == n { w.p } else { w.q * dt };
        let e = it.x[j] + offset[j] - problem.reference[j].state().to_vector();
        let width = 3 * j;
        let s = sens[j].columns(0, width);
        let mut scaled = s.clone_owned();
        for r in 0..6 {
            let sw = weight[r].sqrt();
            scaled.row_mut(r).scale_mut(sw);
        }
        let gram = scaled.transpose() * &scaled;
        let mut h_block = hessian.view_mut((0, 0), (width, width));
        h_block += gram;
        let we = e.component_mul(&weight);
        let grad = s.transpose() * DVector::from_iterator(6, we.iter().copied());
        let mut g_block = linear.rows_mut(0, width);
        g_block += grad;
    }
    for k in 0..n {
        for c in 0..3 {
            let idx = 3 * k + c;
            hessian[(idx, idx)] += w.r[c] * dt;
            linear[idx] += w.r[c] * dt * it.u[k][c];
        }
    }

    let bounded: Vec<usize> = (0..6).filter(|&i| lim.xi_max[i].is_finite()).collect();
    let contraction_grad = problem.contraction.gradient();
    let has_contraction = contraction_grad.amax() > 0.0;
    let m = 2 * nu + 2 * bounded.len() * n + usize::from(has_contraction);
    let mut rows = DMatrix::<f64>::zeros(m, nu);
    let mut upper = DVector::<f64>::zeros(m);
    let mut row = 0;
    for k in 0..n {
        for c in 0..3 {
            let idx = 3 * k + c;
            rows[(row, idx)] = 1.0;
            upper[row] = lim.u_max[c] - it.u[k][c];
            rows[(row + 1, idx)] = -1.0;
            upper[row + 1] = lim.u_max[c] + it.u[k][c];
            row += 2;
        }
    }
    for j in 1..=n {
        let predicted = it.x[j] + offset[j];
        let width = 3 * j;
        for &i in &bounded {
            for c in 0..width {
                let v = sens[j][(i, c)];
                rows[(row, c)] = v;
                rows[(row + 1, c)] = -v;
            }
            upper[row] = lim.xi_max[i] - predicted[i];
            upper[row + 1] = lim.xi_max[i] + predicted[i];
            row += 2;
        }
    }
    if has_contraction {
        let c = &problem.contraction;
        for i in 0..3 {
            rows[(row, i)] = contraction_grad[i];
        }
        upper[row] = c.rhs() - (c.drift() + contraction_grad.dot(&it.u[0]));
        row += 1;
    }
    debug_assert_eq!(row, m);

    Condensed {
        qp: QpProblem::with_rows(hessian, linear, rows, upper),
        sens,
        offset,
    }
}

/// Solves the OCP by full-step SQP on the multiple-shooting transcription.
///
/// A previous solution, when given, is shifted by one stage and used as the
/// initial guess; otherwise the saturated sliding-mode law is rolled out over
/// the horizon. The reported KKT residual is the ∞-norm of the last primal
/// step combined with the remaining shooting defects: a fixed point of the
/// iteration with zero defects is a KKT point of the OCP.
pub fn solve_sqp(
    problem: &OcpProblem,
    warm_start: Option<&OcpSolution>,
    options: &SolverOptions,
) -> OcpSolution {
    let mut it = warm_start
        .and_then(|prev| shifted(problem, prev))
        .unwrap_or_else(|| smc_rollout(problem));
    let n = problem.n_stages();
    let max_iter = if options.rti { 1 } else { options.max_iter.max(1) };
    let mut best: Option<(f64, Iterate)> = None;

    for iter in 1..=max_iter {
        let condensed = condense(problem, &it);
        let qp_sol = match solve_qp(&condensed.qp) {
            Ok(sol) => sol,
            Err(err) => {
                log::debug!("QP subproblem failed at SQP iteration {iter}: {err}");
                let fallback = smc_rollout(problem);
                return to_solution(problem, &fallback, f64::INFINITY, iter, SolveStatus::FallbackSmc);
            }
        };
        let du = &qp_sol.x;
        let mut step: f64 = du.amax();
        for k in 0..n {
            it.u[k] += Vector3::new(du[3 * k], du[3 * k + 1], du[3 * k + 2]);
        }
        for j in 1..=n {
            let dx_dyn = &condensed.sens[j] * du;
            let dx = Vector6::from_iterator(dx_dyn.iter().copied()) + condensed.offset[j];
            step = step.max(dx.amax());
            it.x[j] += dx;
        }
        let defect = max_defect(problem, &it);
        let residual = step.max(defect);
        if residual <= options.tol && defect <= DEFECT_TOL {
            return to_solution(problem, &it, residual, iter, SolveStatus::Converged);
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, it.clone()));
        }
    }
    let (residual, it) = best.expect("at least one SQP iteration ran");
    to_solution(problem, &it, residual, max_iter, SolveStatus::MaxIter)
}
