//! Damped Gauss-Newton for bound-constrained nonlinear least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A residual map `α ↦ r(α)`.
pub trait LeastSquaresProblem {
    type Error;

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>, Self::Error>;
}

impl<F, E> LeastSquaresProblem for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    type Error = E;

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>, E> {
        self(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NON_NEGATIVE: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn project(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop when `‖step‖ ≤ tolerance · (‖α‖ + tolerance)`.
    pub tolerance: f64,
    /// Finite-difference step is `max(fd_step, fd_step·|αⱼ|)`.
    pub fd_step: f64,
    /// Smallest Levenberg damping μ; μ = 0 gives pure Gauss-Newton steps.
    pub damping_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-10,
            fd_step: 1e-6,
            damping_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted residual sum of squares, starting with the initial point.
    pub history: Vec<f64>,
}

pub fn sum_of_squares(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn step_size(x: f64, rel: f64) -> f64 {
    rel.max(rel * x.abs())
}

/// Central-difference Jacobian, one-sided where a bound would be crossed.
///
/// Column `j` is `(r(α + h·eⱼ) − r(α − h·eⱼ)) / 2h`. `base` is `r(α)`, reused by
/// the one-sided columns.
pub fn jacobian_fd<P: LeastSquaresProblem>(
    problem: &P,
    params: &[f64],
    base: &[f64],
    bounds: &[Bounds],
    fd_step: f64,
) -> Result<DMatrix<f64>, P::Error> {
    let m = base.len();
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = params.to_vec();
    for j in 0..n {
        let x = params[j];
        let h = step_size(x, fd_step);
        let b = bounds.get(j).copied().unwrap_or(Bounds::new(f64::NEG_INFINITY, f64::INFINITY));
        let fwd_ok = x + h <= b.upper;
        let bwd_ok = x - h >= b.lower;
        let column: Vec<f64> = if fwd_ok && bwd_ok {
            probe[j] = x + h;
            let rp = problem.residuals(&probe)?;
            probe[j] = x - h;
            let rm = problem.residuals(&probe)?;
            rp.iter().zip(&rm).map(|(p, q)| (p - q) / (2.0 * h)).collect()
        } else {
            // one-sided; if neither full step fits, use the larger gap
            let signed = if fwd_ok || (!bwd_ok && b.upper - x >= x - b.lower) {
                h.min(b.upper - x)
            } else {
                -h.min(x - b.lower)
            };
            if signed == 0.0 {
                vec![0.0; m]
            } else {
                probe[j] = x + signed;
                let rp = problem.residuals(&probe)?;
                rp.iter().zip(base).map(|(p, q)| (p - q) / signed).collect()
            }
        };
        probe[j] = x;
        for (i, v) in column.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

const MAX_DAMPING_RAISES: usize = 40;

/// Minimise `‖r(α)‖²` from `init` subject to `bounds`.
///
/// Each iteration solves `(JᵀJ + μI) step = −Jᵀr`, projects `α + step` onto
/// the box and accepts it only if the residual decreases. Rejected or singular
/// steps raise μ; accepted ones lower it towards the floor. The accepted
/// residual is therefore non-increasing, and the best iterate is returned even
/// when the iteration budget runs out.
pub fn gauss_newton<P: LeastSquaresProblem>(
    problem: &P,
    init: &[f64],
    bounds: &[Bounds],
    options: &SolverOptions,
) -> Result<SolveOutcome, P::Error> {
    let n = init.len();
    let mut params: Vec<f64> = init
        .iter()
        .enumerate()
        .map(|(j, &x)| bounds.get(j).map_or(x, |b| b.project(x)))
        .collect();
    let mut residuals = problem.residuals(&params)?;
    let mut rss = sum_of_squares(&residuals);
    let initial_rss = rss;
    let mut history = vec![rss];
    let floor = options.damping_floor.max(0.0);
    let mut mu = floor;
    let mut iterations = 0;
    let mut converged = n == 0 || rss == 0.0;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jac = match jacobian_fd(problem, &params, &residuals, bounds, options.fd_step) {
            Ok(j) => j,
            // a probe left the model's domain; keep the best iterate
            Err(_) => break,
        };
        let r = DVector::from_column_slice(&residuals);
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * r;
        let diag_scale = normal.diagonal().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let mut accepted = false;
        for _ in 0..MAX_DAMPING_RAISES {
            let mut lhs = normal.clone();
            for k in 0..n {
                lhs[(k, k)] += mu;
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&gradient)),
                None => {
                    mu = raise(mu, diag_scale);
                    continue;
                }
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .enumerate()
                .map(|(j, (&x, &dx))| bounds.get(j).map_or(x + dx, |b| b.project(x + dx)))
                .collect();
            let taken: f64 = trial
                .iter()
                .zip(&params)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = params.iter().map(|x| x * x).sum::<f64>().sqrt();
            let small = taken <= options.tolerance * (norm + options.tolerance);
            if small {
                converged = true;
            }
            match problem.residuals(&trial) {
                Ok(r_trial) => {
                    let rss_trial = sum_of_squares(&r_trial);
                    if rss_trial < rss {
                        params = trial;
                        residuals = r_trial;
                        rss = rss_trial;
                        history.push(rss);
                        mu = (mu / 10.0).max(floor);
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            if small {
                break;
            }
            mu = raise(mu, diag_scale);
        }
        if !accepted && !converged {
            // no descent found at any damping level
            break;
        }
        if rss == 0.0 {
            converged = true;
        }
    }

    Ok(SolveOutcome {
        params,
        residuals,
        rss,
        initial_rss,
        iterations,
        converged,
        history,
    })
}

fn raise(mu: f64, scale: f64) -> f64 {
    let seed = 1e-10 * scale;
    if mu < seed {
        seed
    } else {
        mu * 10.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn linear(a: DMatrix<f64>, b: DVector<f64>) -> impl Fn(&[f64]) -> Result<Vec<f64>, Infallible> {
        move |x: &[f64]| {
            let r = &a * DVector::from_column_slice(x) - &b;
            Ok(r.iter().copied().collect())
        }
    }

    #[test]
    fn affine_jacobian_is_exact() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 4.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let f = linear(a.clone(), b);
        let x = [0.7, -1.2];
        let base = f(&x).unwrap();
        let j = jacobian_fd(&f, &x, &base, &[], 1e-6).unwrap();
        assert!((j - a).abs().max() < 1e-6);
    }

    #[test]
    fn one_sided_at_bounds() {
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![x[0] * x[0]]);
        let base = f(&[0.0]).unwrap();
        let j = jacobian_fd(&f, &[0.0], &base, &[Bounds::NON_NEGATIVE], 1e-6).unwrap();
        // forward difference of x² at 0 is h
        assert!(j[(0, 0)] >= 0.0 && j[(0, 0)] < 1e-5);
        let base = f(&[1.0]).unwrap();
        let j = jacobian_fd(&f, &[1.0], &base, &[Bounds::new(0.0, 1.0)], 1e-6).unwrap();
        assert!((j[(0, 0)] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn empty_parameter_list() {
        let f = |_: &[f64]| Ok::<_, Infallible>(vec![1.0, 2.0]);
        let j = jacobian_fd(&f, &[], &[1.0, 2.0], &[], 1e-6).unwrap();
        assert_eq!(j.shape(), (2, 0));
        let out = gauss_newton(&f, &[], &[], &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.rss, 5.0);
    }

    #[test]
    fn richardson_second_order() {
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![(2.0 * x[0]).sin(), x[0].exp() * x[1]]);
        let x = [0.4, 1.3];
        let base = f(&x).unwrap();
        let exact = [2.0 * (0.8f64).cos(), (0.4f64).exp() * 1.3];
        let err = |h: f64| {
            let j = jacobian_fd(&f, &x, &base, &[], h).unwrap();
            [(j[(0, 0)] - exact[0]).abs(), (j[(1, 0)] - exact[1]).abs()]
        };
        let e1 = err(1e-3);
        let e2 = err(2e-3);
        for k in 0..2 {
            let ratio = e2[k] / e1[k];
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn linear_problem_solved_in_one_step() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_column_slice(&[1.0, 2.9, 5.1, 7.0]);
        let exact = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
        let f = linear(a, b);
        let opts = SolverOptions { max_iterations: 1, damping_floor: 0.0, ..Default::default() };
        let out = gauss_newton(&f, &[10.0, -10.0], &[], &opts).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.params[0] - exact[0]).abs() < 1e-6);
        assert!((out.params[1] - exact[1]).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_with_descent_history() {
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = gauss_newton(&f, &[-1.2, 1.0], &[], &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-6 && (out.params[1] - 1.0).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bounds_are_respected() {
        // unconstrained minimum at x = −2
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![x[0] + 2.0]);
        let out = gauss_newton(&f, &[3.0], &[Bounds::NON_NEGATIVE], &SolverOptions::default()).unwrap();
        assert_eq!(out.params[0], 0.0);
        assert!(out.rss <= out.initial_rss);
    }

    #[test]
    fn starting_at_the_solution() {
        let f = |x: &[f64]| Ok::<_, Infallible>(vec![x[0] - 1.0, x[1] + 3.0]);
        let out = gauss_newton(&f, &[1.0, -3.0], &[], &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.params, vec![1.0, -3.0]);
    }

    #[test]
    fn failing_trials_are_rejected() {
        // residual undefined for x > 1
        let f = |x: &[f64]| {
            if x[0] > 1.0 {
                Err("domain")
            } else {
                Ok(vec![x[0] - 5.0])
            }
        };
        let out = gauss_newton(&f, &[0.0], &[], &SolverOptions::default()).unwrap();
        assert!(out.params[0] <= 1.0);
        assert!(out.rss <= out.initial_rss);
    }
}
