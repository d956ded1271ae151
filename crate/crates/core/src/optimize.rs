//! Quasi-Newton (BFGS) minimization with a backtracking Armijo line search.
//!
//! Only points that decrease the objective are ever accepted, so the
//! returned value is never worse than the starting one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::math;

/// A differentiable objective. `value` may return `+inf` for infeasible
/// points (the line search backs off); `NaN` aborts the search.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    /// Gradient at `x`, where `fx = value(x)` was the last evaluation there.
    fn gradient(&mut self, x: &[f64], fx: f64, grad: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step is shorter than this.
    pub step_tol: f64,
    /// Stop once the objective improves by less than this (absolute) in one
    /// iteration. 0 disables the test.
    pub value_tol: f64,
    /// Length cap on the first trial step of every line search.
    pub max_step: f64,
    /// Hard cap on objective value evaluations (gradients excluded).
    pub max_evals: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-5,
            step_tol: 1e-8,
            value_tol: 0.0,
            max_step: f64::INFINITY,
            max_evals: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    ValueTolerance,
    MaxIterations,
    MaxEvaluations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

pub fn minimize<O: Objective>(obj: &mut O, x0: &[f64], opts: &MinimizeOptions) -> Result<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut evals = 1;
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::Optimization { theta: x });
    }
    let initial_value = f;
    let mut g = vec![0.0; n];
    obj.gradient(&x, f, &mut g);
    check_gradient(&g, &x)?;
    let mut h = identity(n);
    let mut fresh_h = true;
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];

    let finish = |x: Vec<f64>, value, iterations, evaluations, termination| Minimum {
        x,
        value,
        initial_value,
        iterations,
        evaluations,
        termination,
    };

    for it in 0..opts.max_iter {
        if math::sqrt(dot(&g, &g)) < opts.grad_tol {
            return Ok(finish(x, f, it, evals, Termination::GradientTolerance));
        }
        mat_vec_neg(&h, &g, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            h = identity(n);
            fresh_h = true;
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -dot(&g, &g);
        }
        let dir_norm = math::sqrt(dot(&dir, &dir));
        let mut t = if dir_norm > opts.max_step { opts.max_step / dir_norm } else { 1.0 };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if evals >= opts.max_evals {
                return Ok(finish(x, f, it, evals, Termination::MaxEvaluations));
            }
            for i in 0..n {
                trial[i] = x[i] + t * dir[i];
            }
            evals += 1;
            let ft = obj.value(&trial);
            if ft.is_nan() {
                return Err(Error::Optimization { theta: trial.clone() });
            }
            if ft <= f + ARMIJO * t * slope {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(f_new) = accepted else {
            if !fresh_h {
                // Retry from steepest descent before giving up.
                h = identity(n);
                fresh_h = true;
                continue;
            }
            return Ok(finish(x, f, it, evals, Termination::LineSearchFailed));
        };
        obj.gradient(&trial, f_new, &mut g_new);
        check_gradient(&g_new, &trial)?;

        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let step_len = math::sqrt(dot(&s, &s));
        let improvement = f - f_new;
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        f = f_new;

        let sy = dot(&s, &y);
        if sy > 1e-12 * step_len * math::sqrt(dot(&y, &y)) && sy > 0.0 {
            if fresh_h {
                let scale = sy / dot(&y, &y);
                h.iter_mut().flatten().for_each(|v| *v *= scale);
                fresh_h = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }

        if step_len < opts.step_tol {
            return Ok(finish(x, f, it + 1, evals, Termination::StepTolerance));
        }
        if opts.value_tol > 0.0 && improvement < opts.value_tol {
            return Ok(finish(x, f, it + 1, evals, Termination::ValueTolerance));
        }
    }
    Ok(finish(x, f, opts.max_iter, evals, Termination::MaxIterations))
}

fn check_gradient(g: &[f64], x: &[f64]) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Optimization { theta: x.to_vec() })
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec_neg(h: &[Vec<f64>], g: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(h) {
        *o = -dot(row, g);
    }
}

/// Inverse-Hessian update `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Wraps a value-only function and differentiates it by forward differences.
#[derive(Debug)]
pub struct ForwardDifference<F> {
    pub f: F,
    /// Relative step; the absolute step is `step * max(1, |x_i|)`.
    pub step: f64,
}

impl<F: FnMut(&[f64]) -> f64> Objective for ForwardDifference<F> {
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&mut self, x: &[f64], fx: f64, grad: &mut [f64]) {
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let h = self.step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let h_exact = probe[i] - x[i];
            grad[i] = ((self.f)(&probe) - fx) / h_exact;
            probe[i] = x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&mut self, x: &[f64], _: f64, g: &mut [f64]) {
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 200.0 * (x[1] - x[0] * x[0]);
        }
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let m = minimize(&mut Rosenbrock, &[-1.2, 1.0], &MinimizeOptions { max_iter: 500, ..Default::default() })
            .unwrap();
        assert_relative_eq!(m.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(m.x[1], 1.0, epsilon = 1e-5);
        assert!(m.value <= m.initial_value);
    }

    #[test]
    fn forward_difference_quadratic() {
        let mut obj = ForwardDifference {
            f: |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + x[0] * x[1],
            step: 1e-7,
        };
        let m = minimize(&mut obj, &[0.0, 0.0], &MinimizeOptions::default()).unwrap();
        // Stationary point of the quadratic: 2(x-3) + y = 0, 4(y+1) + x = 0.
        let (x, y) = (28.0 / 7.0, -14.0 / 7.0);
        assert_relative_eq!(m.x[0], x, epsilon = 1e-4);
        assert_relative_eq!(m.x[1], y, epsilon = 1e-4);
    }

    #[test]
    fn nan_objective_reports_theta() {
        let mut obj = ForwardDifference { f: |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { -x[0] }, step: 1e-6 };
        let err = minimize(&mut obj, &[0.0], &MinimizeOptions::default()).unwrap_err();
        match err {
            Error::Optimization { theta } => assert!(theta[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn evaluation_cap_stops_early() {
        let opts = MinimizeOptions { max_evals: 5, ..Default::default() };
        let m = minimize(&mut Rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(m.termination, Termination::MaxEvaluations);
        assert!(m.value <= m.initial_value);
    }
}
