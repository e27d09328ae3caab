//! Levenberg–Marquardt minimization of a sum of squared residuals.

use nalgebra::{DMatrix, DVector};

/// A least-squares problem `min ½‖r(p)‖²`.
pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;
    /// `∂r_i/∂p_j`, one row per residual.
    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub cost_rtol: f64,
    /// Stop once the step is shorter than this, relative to the parameters.
    pub step_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, cost_rtol: 1e-10, step_tol: 1e-12, initial_lambda: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// Sum of squared residuals.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `JᵀJ` at the returned parameters.
    pub normal_matrix: DMatrix<f64>,
    /// Residual sum of squares after every accepted step, starting with the
    /// initial point.
    pub history: Vec<f64>,
    pub message: String,
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn levenberg_marquardt<P: LeastSquaresProblem>(problem: &P, init: DVector<f64>, opts: &LmOptions) -> LmReport {
    let mut p = init;
    let mut r = problem.residuals(&p);
    let mut rss = r.norm_squared();
    let mut history = vec![rss];
    let mut lambda = opts.initial_lambda;
    let mut jac = problem.jacobian(&p);
    let mut iterations = 0;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");

    if !rss.is_finite() {
        let jtj = jac.tr_mul(&jac);
        return LmReport { params: p, rss, iterations, converged, normal_matrix: jtj, history, message: "non-finite residuals at the initial point".into() };
    }

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&r);
        if grad.amax() == 0.0 {
            converged = true;
            message = "zero gradient".into();
            break;
        }
        let diag = DVector::from_iterator(jtj.nrows(), jtj.diagonal().iter().map(|d| d.max(1e-300)));
        loop {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        message = "damped normal matrix is not positive definite".into();
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial = &p + &step;
            let r_trial = problem.residuals(&trial);
            let rss_trial = r_trial.norm_squared();
            if finite(&trial) && rss_trial.is_finite() && rss_trial <= rss {
                let rel = (rss - rss_trial) / rss.max(f64::MIN_POSITIVE);
                let small_step = step.norm() <= opts.step_tol * (p.norm() + opts.step_tol);
                p = trial;
                r = r_trial;
                rss = rss_trial;
                history.push(rss);
                jac = problem.jacobian(&p);
                lambda = (lambda / 10.0).max(1e-15);
                if rel < opts.cost_rtol || small_step || rss == 0.0 {
                    converged = true;
                    message = if small_step { "step below tolerance".into() } else { "relative cost change below tolerance".into() };
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step exists at any damping: a stationary point
                // to within rounding.
                converged = true;
                message = "no further decrease possible".into();
                break 'outer;
            }
        }
    }
    let normal_matrix = jac.tr_mul(&jac);
    LmReport { params: p, rss, iterations, converged, normal_matrix, history, message }
}
