//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀ H x + cᵀ x
//! subject to  A x ≤ b
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The method starts
//! from the unconstrained minimizer and adds the most violated constraint at
//! each major iteration, so infeasibility is detected exactly when a violated
//! constraint cannot be reached by any primal or dual step.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    /// One inequality per row: `rows[i]·x ≤ upper[i]`.
    pub rows: DMatrix<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            rows: DMatrix::zeros(0, n),
            upper: DVector::zeros(0),
        }
    }

    /// Builds a problem from a dense constraint block in one shot.
    pub fn with_rows(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        rows: DMatrix<f64>,
        upper: DVector<f64>,
    ) -> Self {
        Self {
            hessian,
            linear,
            rows,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.upper.len()
    }

    /// Appends `lower ≤ x ≤ upper` as inequality rows. Infinite sides are skipped.
    pub fn with_bounds(mut self, lower: &DVector<f64>, upper: &DVector<f64>) -> Self {
        let n = self.dim();
        let mut new_rows = Vec::new();
        let mut new_upper = Vec::new();
        for i in 0..n {
            if upper[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                new_rows.push(row);
                new_upper.push(upper[i]);
            }
            if lower[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = -1.0;
                new_rows.push(row);
                new_upper.push(-lower[i]);
            }
        }
        for (row, ub) in new_rows.iter().zip(new_upper) {
            self.push_row(row, ub);
        }
        self
    }

    pub fn push_row(&mut self, row: &[f64], upper: f64) {
        let n = self.dim();
        assert_eq!(row.len(), n, "constraint row length must equal problem dimension");
        let m = self.rows.nrows();
        let rows = std::mem::replace(&mut self.rows, DMatrix::zeros(0, 0));
        self.rows = rows.insert_row(m, 0.0);
        for (j, v) in row.iter().enumerate() {
            self.rows[(m, j)] = *v;
        }
        let up = std::mem::replace(&mut self.upper, DVector::zeros(0));
        self.upper = up.push(upper);
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// Largest constraint violation `max(0, A x − b)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.num_constraints() == 0 {
            return 0.0;
        }
        (&self.rows * x - &self.upper).max().max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Indices of the constraint rows active at the solution.
    pub active: Vec<usize>,
    /// Lagrange multiplier per constraint row (zero for inactive rows).
    pub multipliers: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QpError {
    #[error("QP Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("QP constraints are infeasible")]
    Infeasible,
    #[error("QP solver exceeded {0} iterations")]
    MaxIterations(usize),
    #[error("QP dimension mismatch: {0}")]
    Dimension(String),
}

const FEAS_TOL: f64 = 1e-11;
const STEP_TOL: f64 = 1e-14;

/// Plane rotation zeroing `b` in `(a, b)`; returns `(c, s, h)`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_columns(j: &mut DMatrix<f64>, i: usize, k: usize, c: f64, s: f64) {
    for row in 0..j.nrows() {
        let a = j[(row, i)];
        let b = j[(row, k)];
        j[(row, i)] = c * a + s * b;
        j[(row, k)] = -s * a + c * b;
    }
}

pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution, QpError> {
    let n = problem.dim();
    let m = problem.num_constraints();
    if problem.hessian.nrows() != n || problem.hessian.ncols() != n {
        return Err(QpError::Dimension(format!(
            "Hessian is {}x{} for {n} variables",
            problem.hessian.nrows(),
            problem.hessian.ncols()
        )));
    }
    if problem.rows.nrows() != m || (m > 0 && problem.rows.ncols() != n) {
        return Err(QpError::Dimension("constraint matrix shape".into()));
    }

    let chol = problem
        .hessian
        .clone()
        .cholesky()
        .ok_or(QpError::NotPositiveDefinite)?;
    // J = L⁻ᵀ so that J Jᵀ = H⁻¹.
    let l = chol.l();
    let mut j = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut x = -chol.solve(&problem.linear);

    let row_norms: Vec<f64> = (0..m)
        .map(|i| problem.rows.row(i).norm().max(f64::MIN_POSITIVE))
        .collect();

    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut duals: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let max_iter = 10 * (n + m) + 100;
    let mut iterations = 0;

    loop {
        // Most violated inactive constraint, measured in scaled distance.
        let slack = &problem.upper - &problem.rows * &x;
        let mut p = None;
        let mut worst = -FEAS_TOL;
        for i in 0..m {
            if is_active[i] {
                continue;
            }
            let scaled = slack[i] / row_norms[i];
            if scaled < worst {
                worst = scaled;
                p = Some(i);
            }
        }
        let Some(p) = p else { break };

        // Constraint p in the form nᵀx ≥ β with n = −a_p.
        let np: DVector<f64> = -problem.rows.row(p).transpose();
        let mut dual_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::MaxIterations(max_iter));
            }
            let q = active.len();
            let d = j.transpose() * &np;
            let mut z = DVector::<f64>::zeros(n);
            for col in q..n {
                z.axpy(d[col], &j.column(col), 1.0);
            }
            let mut rvec = vec![0.0; q];
            for i in (0..q).rev() {
                let mut acc = d[i];
                for k in (i + 1)..q {
                    acc -= r[(i, k)] * rvec[k];
                }
                rvec[i] = acc / r[(i, i)];
            }

            // Dual (partial) step length.
            let mut t1 = f64::INFINITY;
            let mut block = None;
            for i in 0..q {
                if rvec[i] > 0.0 {
                    let ratio = duals[i] / rvec[i];
                    if ratio < t1 {
                        t1 = ratio;
                        block = Some(i);
                    }
                }
            }
            // Primal (full) step length.
            let znp = z.dot(&np);
            let t2 = if znp > STEP_TOL * np.norm_squared() {
                let s_p = problem.upper[p] - problem.rows.row(p).dot(&x.transpose());
                (-s_p / znp).max(0.0)
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }

            if t2.is_infinite() {
                for i in 0..q {
                    duals[i] -= t1 * rvec[i];
                }
                dual_p += t1;
                let k = block.expect("finite dual step has a blocking constraint");
                drop_constraint(&mut j, &mut r, &mut active, &mut duals, &mut is_active, k);
                continue;
            }

            let t = t1.min(t2);
            x.axpy(t, &z, 1.0);
            for i in 0..q {
                duals[i] -= t * rvec[i];
            }
            dual_p += t;

            if t2 <= t1 {
                // Full step: p joins the active set.
                let mut d = d;
                for col in ((q + 1)..n).rev() {
                    let (c, s, h) = givens(d[col - 1], d[col]);
                    if s != 0.0 {
                        d[col - 1] = h;
                        d[col] = 0.0;
                        rotate_columns(&mut j, col - 1, col, c, s);
                    }
                }
                for i in 0..=q {
                    r[(i, q)] = d[i];
                }
                for i in (q + 1)..n {
                    r[(i, q)] = 0.0;
                }
                active.push(p);
                duals.push(dual_p);
                is_active[p] = true;
                break;
            }
            let k = block.expect("partial step has a blocking constraint");
            drop_constraint(&mut j, &mut r, &mut active, &mut duals, &mut is_active, k);
        }
    }

    let mut multipliers = DVector::zeros(m);
    for (idx, &row) in active.iter().enumerate() {
        multipliers[row] = duals[idx].max(0.0);
    }
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        active,
        multipliers,
        iterations,
    })
}

fn drop_constraint(
    j: &mut DMatrix<f64>,
    r: &mut DMatrix<f64>,
    active: &mut Vec<usize>,
    duals: &mut Vec<f64>,
    is_active: &mut [bool],
    k: usize,
) {
    let q = active.len();
    // Shift columns k+1..q of R left by one; R becomes upper Hessenberg.
    for col in k..(q - 1) {
        for row in 0..q {
            r[(row, col)] = r[(row, col + 1)];
        }
    }
    for row in 0..r.nrows() {
        r[(row, q - 1)] = 0.0;
    }
    for i in k..(q - 1) {
        let (c, s, h) = givens(r[(i, i)], r[(i + 1, i)]);
        if s == 0.0 {
            continue;
        }
        r[(i, i)] = h;
        r[(i + 1, i)] = 0.0;
        for col in (i + 1)..(q - 1) {
            let a = r[(i, col)];
            let b = r[(i + 1, col)];
            r[(i, col)] = c * a + s * b;
            r[(i + 1, col)] = -s * a + c * b;
        }
        rotate_columns(j, i, i + 1, c, s);
    }
    is_active[active[k]] = false;
    active.remove(k);
    duals.remove(k);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimizer() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let c = DVector::from_vec(vec![-2.0, -8.0]);
        let sol = solve_qp(&QpProblem::new(h, c)).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14);
        assert!((sol.x[1] - 2.0).abs() < 1e-14);
        assert!(sol.active.is_empty());
    }

    #[test]
    fn single_active_bound() {
        // minimize ½(x−3)² + ½(y+1)² with x ≤ 1, y ≥ 0
        let h = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![-3.0, 1.0]);
        let qp = QpProblem::new(h, c).with_bounds(
            &DVector::from_vec(vec![f64::NEG_INFINITY, 0.0]),
            &DVector::from_vec(vec![1.0, f64::INFINITY]),
        );
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);
        assert_eq!(sol.active.len(), 2);
        // ∇f + Aᵀμ = 0: x-multiplier 2, y-multiplier 1
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-12);
        assert!((sol.multipliers[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_row_constraint() {
        // min ½x² + ½y² + x s.t. x + 2y ≥ 1: projection of (−1, 0) onto the half-plane
        let mut qp = QpProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0]));
        qp.push_row(&[-1.0, -2.0], -1.0);
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.x[0] + 0.6).abs() < 1e-12, "{}", sol.x);
        assert!((sol.x[1] - 0.8).abs() < 1e-12);
        assert!((sol.multipliers[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let mut qp = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1));
        qp.push_row(&[1.0], -1.0);
        qp.push_row(&[-1.0], -1.0);
        assert_eq!(solve_qp(&qp).unwrap_err(), QpError::Infeasible);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let qp = QpProblem::new(h, DVector::zeros(2));
        assert_eq!(solve_qp(&qp).unwrap_err(), QpError::NotPositiveDefinite);
    }

    #[test]
    fn equal_bounds_pin_the_variable() {
        let qp = QpProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![-5.0, -5.0]))
            .with_bounds(
                &DVector::from_vec(vec![0.5, -1.0]),
                &DVector::from_vec(vec![0.5, 1.0]),
            );
        let sol = solve_qp(&qp).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }
}
