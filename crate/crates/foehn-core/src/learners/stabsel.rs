//! Stability selection: repeated lasso paths on class-stratified
//! half-samples; columns that enter the path early in more than 60% of runs
//! feed a final unregularized logistic regression.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{fit_at_lambda, lambda_grid};
use super::{fit_logistic, logistic, logit, ColumnSchema, Dataset, LassoOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StabselOptions {
    /// number of half-sample runs
    pub m: usize,
    /// how many first path entrants each run records
    pub k_first: usize,
    /// selection-frequency threshold
    pub threshold: f64,
    pub path: LassoOptions,
}

impl Default for StabselOptions {
    fn default() -> Self {
        StabselOptions {
            m: 200,
            k_first: 40,
            threshold: 0.6,
            // activation order is insensitive to the last digits, so the
            // per-run paths may converge more loosely than a final fit
            path: LassoOptions {
                cd_tol: 1e-7,
                max_irls: 30,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabselModel {
    pub schema: ColumnSchema,
    /// per-column activation frequency over the runs
    pub selection_freq: Vec<f64>,
    /// column indices with frequency above the threshold
    pub selected: Vec<usize>,
    pub intercept: f64,
    /// standardized-scale coefficients, aligned with `selected`
    pub coefs: Vec<f64>,
    /// true when the final fit needed the ridge fallback for separation
    pub separated: bool,
    pub threshold: f64,
}

impl StabselModel {
    pub fn predict_standardized(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let n = x.first().map_or(0, |c| c.len());
        (0..n)
            .map(|i| {
                let mut eta = self.intercept;
                for (s, &j) in self.selected.iter().enumerate() {
                    eta += self.coefs[s] * x[j][i];
                }
                logistic(eta)
            })
            .collect()
    }
}

/// Class-stratified half-sample of row indices.
fn half_sample(y: &[u8], rng: &mut impl Rng) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut rows: Vec<usize> = pos[..pos.len() / 2]
        .iter()
        .chain(&neg[..neg.len() / 2])
        .copied()
        .collect();
    rows.sort_unstable();
    rows
}

/// Column indices in the order they first become active as lambda descends,
/// truncated to the first `k_first`. Ties inside one grid step break by
/// column index.
fn activation_order(
    x: &[Vec<f64>],
    y: &[u8],
    k_first: usize,
    opts: &LassoOptions,
) -> Result<Vec<usize>> {
    let lambdas = lambda_grid(x, y, opts.n_lambda, opts.lambda_min_ratio);
    let mut beta0 = logit(y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64);
    let mut beta = vec![0.0; x.len()];
    let mut order = Vec::new();
    let mut seen = vec![false; x.len()];
    for &lambda in &lambdas {
        fit_at_lambda(x, y, lambda, &mut beta0, &mut beta, opts)?;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 && !seen[j] {
                seen[j] = true;
                order.push(j);
            }
        }
        if order.len() >= k_first {
            order.truncate(k_first);
            break;
        }
    }
    Ok(order)
}

pub fn fit_stabsel(data: &Dataset, opts: &StabselOptions, seed: u64) -> Result<StabselModel> {
    if !data.both_classes_present() {
        return Err(Error::Estimation(
            "single-class response; cannot run stability selection".into(),
        ));
    }
    if data.y.iter().filter(|&&v| v == 1).count() < 2 {
        return Err(Error::Estimation(
            "need at least 2 positives for stratified half-samples".into(),
        ));
    }

    // each run owns a derived seed, so run order is irrelevant
    let orders: Vec<Result<Vec<usize>>> = (0..opts.m)
        .into_par_iter()
        .map(|run| {
            let run_seed = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(run as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
            let rows = half_sample(&data.y, &mut rng);
            let sub = data.subset(&rows);
            activation_order(&sub.x, &sub.y, opts.k_first, &opts.path)
        })
        .collect();

    let mut counts = vec![0usize; data.n_cols()];
    for order in orders {
        for j in order? {
            counts[j] += 1;
        }
    }
    let selection_freq: Vec<f64> = counts.iter().map(|&c| c as f64 / opts.m as f64).collect();
    let selected: Vec<usize> = (0..data.n_cols())
        .filter(|&j| selection_freq[j] > opts.threshold)
        .collect();

    let xsel: Vec<Vec<f64>> = selected.iter().map(|&j| data.x[j].clone()).collect();
    let (fit, separated) = match fit_logistic(&xsel, &data.y, 0.0, 100) {
        Ok(f) if f.converged => (f, false),
        // (quasi-)separation or a singular Hessian: tiny ridge keeps the
        // refit well-posed
        _ => (fit_logistic(&xsel, &data.y, 1e-6, 200)?, true),
    };

    Ok(StabselModel {
        schema: data.schema.clone(),
        selection_freq,
        selected,
        intercept: fit.intercept,
        coefs: fit.coefs,
        separated,
        threshold: opts.threshold,
    })
}
