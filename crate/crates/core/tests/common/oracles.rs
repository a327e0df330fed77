//! Independent checks shared by the property suites and the acceptance run.

use super::{random_state, random_torque, random_vec3, rel_err, rng};
use lnmpc_core::controllers::smc_guaranteed_rate;
use lnmpc_core::lnmpc::qp::{solve_qp, QpProblem};
use lnmpc_core::{
    attitude_derivative, dynamics_jacobians, lyapunov_rate, rk4_step, rk4_step_sensitivities,
    sliding_surface, smc_control, tracking_error, AttitudeState, ControlTorque, ReferenceSample,
    SmcGains, UavParams,
};
use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Coordinates beyond this count stay unbounded so enumeration remains cheap (3^7 patterns).
pub const MAX_BOXED: usize = 7;

fn perturbed(state: &AttitudeState, i: usize, h: f64) -> AttitudeState {
    let mut v = state.to_vector();
    v[i] += h;
    AttitudeState::from_vector(&v)
}

fn perturbed_u(u: &ControlTorque, i: usize, h: f64) -> ControlTorque {
    let mut t = u.tau;
    t[i] += h;
    ControlTorque::new(t)
}

/// Worst relative error of analytic `(A, B)` against central differences of `f`.
fn jacobian_error(
    x: &AttitudeState,
    u: &ControlTorque,
    a: &nalgebra::Matrix6<f64>,
    b: &nalgebra::Matrix6x3<f64>,
    f: impl Fn(&AttitudeState, &ControlTorque) -> Vector6<f64>,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        let col = (f(&perturbed(x, i, FD_STEP), u) - f(&perturbed(x, i, -FD_STEP), u)) / (2.0 * FD_STEP);
        for k in 0..6 {
            worst = worst.max(rel_err(a[(k, i)], col[k]));
        }
    }
    for i in 0..3 {
        let col = (f(x, &perturbed_u(u, i, FD_STEP)) - f(x, &perturbed_u(u, i, -FD_STEP))) / (2.0 * FD_STEP);
        for k in 0..6 {
            worst = worst.max(rel_err(b[(k, i)], col[k]));
        }
    }
    worst
}

pub fn continuous_jacobian_worst(points: usize, seed: u64) -> f64 {
    let params = UavParams::default();
    let mut r = rng(seed);
    (0..points)
        .map(|_| {
            let x = random_state(&mut r);
            let u = random_torque(&mut r, 0.1);
            let (a, b) = dynamics_jacobians(&x, &u, &params);
            jacobian_error(&x, &u, &a, &b, |x, u| attitude_derivative(x, u, &params))
        })
        .fold(0.0, f64::max)
}

pub fn rk4_sensitivity_worst(points: usize, seed: u64) -> f64 {
    let params = UavParams::default();
    let dt = 0.02;
    let mut r = rng(seed);
    (0..points)
        .map(|_| {
            let x = random_state(&mut r);
            let u = random_torque(&mut r, 0.1);
            let (next, a, b) = rk4_step_sensitivities(&x, &u, &params, dt);
            assert_eq!(next, rk4_step(&x, &u, &params, dt));
            jacobian_error(&x, &u, &a, &b, |x, u| rk4_step(x, u, &params, dt).to_vector())
        })
        .fold(0.0, f64::max)
}

/// Worst gap between `V̇` under the sliding-mode law and `−sᵀ(c₁ sign s + c₂ s)`.
pub fn smc_identity_worst(points: usize, seed: u64) -> f64 {
    let params = UavParams::default();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let gains = SmcGains::new(
            Vector3::from_fn(|_, _| r.random_range(0.5..5.0)),
            Vector3::from_fn(|_, _| r.random_range(0.001..0.5)),
            Vector3::from_fn(|_, _| r.random_range(0.01..2.0)),
        )
        .unwrap();
        let x = random_state(&mut r);
        let reference = ReferenceSample::new(
            random_vec3(&mut r, 1.5),
            random_vec3(&mut r, 1.5),
            random_vec3(&mut r, 3.0),
        );
        let u = smc_control(&x, &reference, &gains, &params);
        let rate = lyapunov_rate(&x, &reference, &u, &gains, &params);
        let s = sliding_surface(&tracking_error(&x, &reference), &gains);
        let expected: f64 = (0..3)
            .map(|i| -s.s[i] * (gains.c1[i] * s.s[i].signum() + gains.c2[i] * s.s[i]))
            .sum();
        assert!(rate <= 0.0);
        worst = worst
            .max((rate - expected).abs())
            .max((smc_guaranteed_rate(&s, &gains) - expected).abs());
    }
    worst
}

pub fn random_spd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(n, n) * 0.1
}

pub fn objective(h: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(h * x)) + c.dot(x)
}

/// Minimizes over every assignment of {free, at lower, at upper} to the boxed coordinates.
pub fn enumerate_box(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    boxed: &[usize],
) -> DVector<f64> {
    let n = h.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let patterns = 3usize.pow(boxed.len() as u32);
    for code in 0..patterns {
        let mut fixed = vec![None; n];
        let mut rest = code;
        for &i in boxed {
            fixed[i] = match rest % 3 {
                0 => None,
                1 => Some(lo[i]),
                _ => Some(hi[i]),
            };
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut x = DVector::from_fn(n, |i, _| fixed[i].unwrap_or(0.0));
        if !free.is_empty() {
            // H_ff x_f = −(c_f + H_fa x_a)
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                -(c[i] + (0..n).filter(|j| fixed[*j].is_some()).map(|j| h[(i, j)] * x[j]).sum::<f64>())
            });
            let xf = hff.lu().solve(&rhs).expect("principal submatrix of SPD is invertible");
            for (a, &i) in free.iter().enumerate() {
                x[i] = xf[a];
            }
        }
        let feasible = (0..n).all(|i| x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12);
        if feasible {
            let f = objective(h, c, &x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.expect("box QP is feasible").1
}

pub struct BoxTrial {
    pub n: usize,
    /// `‖x − x*‖∞` against the enumeration optimum.
    pub solution_error: f64,
    /// Objective gap relative to `1 + |f*|`.
    pub objective_error: f64,
}

/// Random box QPs with `n ≤ 20`; at most [`MAX_BOXED`] coordinates carry bounds.
pub fn box_qp_trials(trials: usize, seed: u64) -> Vec<BoxTrial> {
    let mut r = rng(seed);
    (0..trials)
        .map(|trial| {
            let n = r.random_range(1..=20);
            let h = random_spd(&mut r, n);
            let c = DVector::from_fn(n, |_, _| r.random_range(-3.0..3.0));
            let boxed: Vec<usize> = if n <= MAX_BOXED {
                (0..n).collect()
            } else {
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..MAX_BOXED {
                    let j = r.random_range(i..n);
                    idx.swap(i, j);
                }
                idx.truncate(MAX_BOXED);
                idx
            };
            let mut lo = DVector::repeat(n, f64::NEG_INFINITY);
            let mut hi = DVector::repeat(n, f64::INFINITY);
            for &i in &boxed {
                let a = r.random_range(-1.0..0.5);
                lo[i] = a;
                hi[i] = a + r.random_range(0.0..1.5);
            }
            let qp = QpProblem::new(h.clone(), c.clone()).with_bounds(&lo, &hi);
            let sol = solve_qp(&qp).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
            let oracle = enumerate_box(&h, &c, &lo, &hi, &boxed);
            let f_star = objective(&h, &c, &oracle);
            BoxTrial {
                n,
                solution_error: (&sol.x - &oracle).amax(),
                objective_error: (sol.objective - f_star).abs() / (1.0 + f_star.abs()),
            }
        })
        .collect()
}
