//! Levenberg-Marquardt nonlinear least squares with a central-difference
//! Jacobian.
//!
//! The damping term is scaled by the diagonal of `JᵀJ` (Marquardt's
//! variant) and adjusted by a factor of ten: divided on an accepted step,
//! multiplied on a rejected one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_FACTOR: f64 = 10.0;
const LAMBDA_MAX: f64 = 1e16;
const DIAG_FLOOR: f64 = 1e-12;
const JACOBIAN_REL_STEP: f64 = 1e-6;

/// A least-squares problem: minimise `Σ rᵢ(p)²` starting from `initial`.
pub struct LmProblem<F> {
    residuals: F,
    initial: Vec<f64>,
    max_iterations: usize,
    tolerance: f64,
}

impl<F> LmProblem<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(residuals: F, initial: Vec<f64>) -> Self {
        Self {
            residuals,
            initial,
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }

    pub fn max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Relative step-norm tolerance. Also used as the relative cost-decrease
    /// tolerance.
    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Root mean square of the residual vector at `params`.
    pub rmse: f64,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

fn jacobian<F>(f: &F, p: &[f64], m: usize) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = p.to_vec();
    for j in 0..n {
        let h = JACOBIAN_REL_STEP * p[j].abs().max(1.0);
        probe[j] = p[j] + h;
        let fwd = f(&probe);
        probe[j] = p[j] - h;
        let bwd = f(&probe);
        probe[j] = p[j];
        if fwd.len() != m || bwd.len() != m || !all_finite(&fwd) || !all_finite(&bwd) {
            return None;
        }
        for i in 0..m {
            jac[(i, j)] = (fwd[i] - bwd[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

fn solve_damped(jtj: &DMatrix<f64>, rhs: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = jtj.nrows();
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
    let floor = (max_diag * DIAG_FLOOR).max(f64::MIN_POSITIVE);
    let mut a = jtj.clone();
    for i in 0..n {
        a[(i, i)] += lambda * jtj[(i, i)].max(floor);
    }
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    a.lu().solve(rhs)
}

/// Fits the problem and returns the parameters at a local minimum of the sum
/// of squared residuals.
pub fn lm_fit<F>(problem: &LmProblem<F>) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if problem.initial.is_empty() {
        return Err(Error::param(
            "initial",
            "at least one parameter is required",
        ));
    }
    if !(problem.tolerance > 0.0) {
        return Err(Error::param("tolerance", "must be > 0"));
    }
    let f = &problem.residuals;
    let mut p = problem.initial.clone();
    let mut r = f(&p);
    let m = r.len();
    if m < p.len() {
        return Err(Error::param(
            "residuals",
            format!("{} residuals for {} parameters", m, p.len()),
        ));
    }
    if !all_finite(&r) {
        return Err(Error::NonFiniteResidual);
    }
    let mut cost = sum_sq(&r);
    let mut lambda = LAMBDA_INIT;
    let rmse = |c: f64| (c / m as f64).sqrt();

    for iter in 0..problem.max_iterations {
        if cost == 0.0 {
            return Ok(LmFit {
                params: p,
                rmse: 0.0,
                cost,
                iterations: iter,
            });
        }
        let jac = jacobian(f, &p, m).ok_or(Error::NonFiniteResidual)?;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let neg_grad = -&grad;

        loop {
            let step = match solve_damped(&jtj, &neg_grad, lambda) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda *= LAMBDA_FACTOR;
                    if lambda > LAMBDA_MAX {
                        return Ok(LmFit {
                            rmse: rmse(cost),
                            params: p,
                            cost,
                            iterations: iter,
                        });
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = f(&trial);
            let cost_trial = if r_trial.len() == m && all_finite(&r_trial) {
                sum_sq(&r_trial)
            } else {
                f64::INFINITY
            };

            if cost_trial < cost {
                let step_norm = step.norm();
                let p_norm = DVector::from_column_slice(&p).norm();
                let decrease = cost - cost_trial;
                p = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda / LAMBDA_FACTOR).max(1e-12);
                let tol = problem.tolerance;
                if step_norm <= tol * (p_norm + tol) || decrease <= tol * cost {
                    return Ok(LmFit {
                        rmse: rmse(cost),
                        params: p,
                        cost,
                        iterations: iter + 1,
                    });
                }
                break;
            }

            lambda *= LAMBDA_FACTOR;
            if lambda > LAMBDA_MAX {
                // No descent direction left at working precision.
                return Ok(LmFit {
                    rmse: rmse(cost),
                    params: p,
                    cost,
                    iterations: iter + 1,
                });
            }
        }
    }

    Err(Error::NotConverged {
        iterations: problem.max_iterations,
        rmse: rmse(cost),
        params: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_law(p: &[f64], x: f64) -> f64 {
        p[0] * x.powf(p[1]) + p[2]
    }

    #[test]
    fn recovers_power_law_from_exact_samples() {
        let truth = [0.0116, -0.5855, -0.0743];
        let xs: Vec<f64> = (0..30)
            .map(|k| 5e-5 * (1e-2_f64 / 5e-5).powf(k as f64 / 29.0))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| power_law(&truth, x)).collect();
        let problem = LmProblem::new(
            |p: &[f64]| {
                xs.iter()
                    .zip(&ys)
                    .map(|(&x, &y)| power_law(p, x) - y)
                    .collect()
            },
            vec![0.02, -0.5, 0.0],
        )
        .max_iterations(500)
        .tolerance(1e-15);
        let fit = lm_fit(&problem).unwrap();
        for (got, want) in fit.params.iter().zip(truth) {
            assert!(((got - want) / want).abs() <= 1e-6, "{got} vs {want}");
        }
        assert!(fit.rmse < 1e-10);
    }

    #[test]
    fn constant_model_on_constant_data() {
        let data = [2.5; 8];
        let problem = LmProblem::new(
            |p: &[f64]| data.iter().map(|y| p[0] - y).collect(),
            vec![0.0],
        );
        let fit = lm_fit(&problem).unwrap();
        assert!((fit.params[0] - 2.5).abs() < 1e-12);
        assert!(fit.rmse < 1e-12);
    }

    #[test]
    fn line_through_collinear_points() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        let problem = LmProblem::new(
            |p: &[f64]| pts.iter().map(|(x, y)| p[0] * x + p[1] - y).collect(),
            vec![0.0, 0.0],
        );
        let fit = lm_fit(&problem).unwrap();
        assert!((fit.params[0] - 2.0).abs() < 1e-9);
        assert!((fit.params[1] - 1.0).abs() < 1e-9);
        assert!(fit.rmse < 1e-9);
    }

    #[test]
    fn non_finite_initial_residual_is_rejected() {
        let problem = LmProblem::new(|p: &[f64]| vec![p[0].ln(), 0.0], vec![-1.0]);
        assert!(matches!(lm_fit(&problem), Err(Error::NonFiniteResidual)));
    }

    #[test]
    fn underdetermined_problem_is_rejected() {
        let problem = LmProblem::new(|p: &[f64]| vec![p[0] + p[1]], vec![0.0, 0.0]);
        assert!(matches!(
            lm_fit(&problem),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn iteration_budget_exhaustion_reports_last_iterate() {
        // Rosenbrock from a distant start needs many more than two iterations.
        let problem = LmProblem::new(
            |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]],
            vec![-1.2, 1.0],
        )
        .max_iterations(2);
        match lm_fit(&problem) {
            Err(Error::NotConverged {
                iterations, params, ..
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(params.len(), 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let problem = LmProblem::new(
            |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]],
            vec![-1.2, 1.0],
        );
        let a = lm_fit(&problem).unwrap();
        let b = lm_fit(&problem).unwrap();
        assert_eq!(a, b);
        assert!((a.params[0] - 1.0).abs() < 1e-6 && (a.params[1] - 1.0).abs() < 1e-6);
    }
}
