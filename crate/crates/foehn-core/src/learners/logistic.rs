//! Unregularized (optionally ridge-stabilized) logistic regression via
//! Newton/IRLS, used for the final stability-selection refit.

use nalgebra::{DMatrix, DVector};

use super::logistic;
use crate::{Error, Result};

pub struct LogisticFit {
    pub intercept: f64,
    pub coefs: Vec<f64>,
    pub converged: bool,
}

/// Fits y ~ intercept + x (column-major covariates) by Newton iteration with
/// an optional ridge penalty on the slopes.
pub fn fit_logistic(x: &[Vec<f64>], y: &[u8], ridge: f64, max_iter: usize) -> Result<LogisticFit> {
    let n = y.len();
    let k = x.len();
    let p = k + 1;
    let mut beta = DVector::zeros(p);
    let pos_rate = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    beta[0] = super::logit(pos_rate);

    let mut converged = false;
    for _ in 0..max_iter {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..n {
            let mut eta = beta[0];
            for j in 0..k {
                eta += beta[j + 1] * x[j][i];
            }
            let pi = logistic(eta);
            let w = (pi * (1.0 - pi)).max(1e-10);
            let r = y[i] as f64 - pi;
            let mut xi = vec![1.0; p];
            for j in 0..k {
                xi[j + 1] = x[j][i];
            }
            for a in 0..p {
                grad[a] += xi[a] * r;
                for b in 0..p {
                    hess[(a, b)] += xi[a] * w * xi[b];
                }
            }
        }
        for j in 1..p {
            grad[j] -= ridge * beta[j];
            hess[(j, j)] += ridge;
        }
        let step = hess
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&grad))
            .ok_or_else(|| Error::Estimation("singular Hessian in logistic fit".into()))?;
        let delta = step.norm();
        beta += step;
        if !beta.iter().all(|v| v.is_finite()) {
            return Err(Error::Estimation("logistic fit diverged".into()));
        }
        if delta < 1e-10 {
            converged = true;
            break;
        }
    }
    // runaway coefficients signal (quasi-)separation
    if beta.iter().any(|v| v.abs() > 30.0) {
        converged = false;
    }
    Ok(LogisticFit {
        intercept: beta[0],
        coefs: beta.iter().skip(1).copied().collect(),
        converged,
    })
}
