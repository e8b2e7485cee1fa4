//! BFGS ascent over the free θ components with Armijo backtracking.

use nalgebra::{DMatrix, DVector, Vector4};
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::model::FEATURE_DIM;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BfgsSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

/// Objective values after the start and every accepted step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AscentTrace {
    pub values: Vec<f64>,
}

impl AscentTrace {
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

pub(crate) struct Run {
    pub theta: Vector4<f64>,
    pub value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: AscentTrace,
}

fn gather(v: &Vector4<f64>, free: &[usize]) -> DVector<f64> {
    DVector::from_iterator(free.len(), free.iter().map(|&k| v[k]))
}

fn scatter(step: &DVector<f64>, free: &[usize]) -> Vector4<f64> {
    let mut out = Vector4::zeros();
    for (i, &k) in free.iter().enumerate() {
        out[k] = step[i];
    }
    out
}

pub(crate) fn maximize(
    objective: &Objective,
    init: Vector4<f64>,
    mask: &[bool; FEATURE_DIM],
    s: &BfgsSettings,
    n_pairs: usize,
) -> Run {
    let free: Vec<usize> = (0..FEATURE_DIM).filter(|&k| mask[k]).collect();
    let dim = free.len();
    let mut theta = init;
    let Some(start) = objective.evaluate(&theta, false) else {
        return Run { theta, value: None, iterations: 0, converged: false, trace: AscentTrace::default() };
    };
    let mut value = start.value;
    let mut grad = gather(&start.gradient, &free);
    let scale = n_pairs.max(1) as f64;
    let steepest = |g: &DVector<f64>| DMatrix::identity(dim, dim) / g.amax().max(1.0);
    let mut h_inv = steepest(&grad);
    let mut is_steepest = true;
    let mut trace = AscentTrace { values: vec![value] };
    let mut converged = false;
    let mut iterations = 0;

    while iterations < s.max_iters {
        if grad.amax() / scale <= s.grad_tol {
            converged = true;
            break;
        }
        let mut dir = &h_inv * &grad;
        let mut slope = grad.dot(&dir);
        if !(slope > 0.0) {
            h_inv = steepest(&grad);
            is_steepest = true;
            dir = &h_inv * &grad;
            slope = grad.dot(&dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=s.max_backtracks {
            let candidate = theta + scatter(&(&dir * step), &free);
            if let Some(e) = objective.evaluate(&candidate, false) {
                if e.value >= value + s.armijo_c * step * slope {
                    accepted = Some((candidate, e));
                    break;
                }
            }
            step *= s.backtrack_factor;
        }
        let Some((candidate, e)) = accepted else {
            if is_steepest {
                break;
            }
            h_inv = steepest(&grad);
            is_steepest = true;
            continue;
        };
        iterations += 1;
        let new_grad = gather(&e.gradient, &free);
        // Minimization convention for the curvature pair: y = ∇(-ℓ)_new - ∇(-ℓ)_old.
        let sk = &dir * step;
        let yk = &grad - &new_grad;
        let sy = sk.dot(&yk);
        if sy > 1e-12 * sk.norm() * yk.norm() {
            if is_steepest {
                h_inv = DMatrix::identity(dim, dim) * (sy / yk.dot(&yk));
            }
            let rho = 1.0 / sy;
            let left = DMatrix::identity(dim, dim) - &sk * yk.transpose() * rho;
            h_inv = &left * &h_inv * left.transpose() + &sk * sk.transpose() * rho;
            is_steepest = false;
        } else {
            h_inv = steepest(&new_grad);
            is_steepest = true;
        }
        theta = candidate;
        value = e.value;
        grad = new_grad;
        trace.values.push(value);
    }
    if !converged && grad.amax() / scale <= s.grad_tol {
        converged = true;
    }
    Run { theta, value: Some(value), iterations, converged, trace }
}
