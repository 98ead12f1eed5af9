//! L1-penalized logistic regression: IRLS outer loop with soft-threshold
//! coordinate descent, fitted along a descending lambda path with warm
//! starts, tuned by stratified cross-validation on the binomial deviance.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{logistic, logit, stratified_folds, ColumnSchema, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    pub max_irls: usize,
    pub max_cd_sweeps: usize,
    /// coordinate-descent convergence threshold on coefficient change
    pub cd_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            cv_folds: 30,
            max_irls: 100,
            max_cd_sweeps: 10_000,
            cd_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl PathPoint {
    pub fn eta(&self, x: &[Vec<f64>], i: usize) -> f64 {
        let mut eta = self.beta0;
        for (j, b) in self.beta.iter().enumerate() {
            if *b != 0.0 {
                eta += b * x[j][i];
            }
        }
        eta
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Smallest lambda at which every slope is zero:
/// `max_j |x_j' (y - mean(y))| / n`.
pub fn lambda_max(x: &[Vec<f64>], y: &[u8]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    x.iter()
        .map(|col| {
            col.iter()
                .zip(y)
                .map(|(&xi, &yi)| xi * (yi as f64 - ybar))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

/// Descending log-spaced grid from lambda_max down to ratio * lambda_max.
pub fn lambda_grid(x: &[Vec<f64>], y: &[u8], n_lambda: usize, ratio: f64) -> Vec<f64> {
    let lmax = lambda_max(x, y);
    if lmax == 0.0 {
        return vec![0.0];
    }
    (0..n_lambda)
        .map(|i| lmax * ratio.powf(i as f64 / (n_lambda - 1) as f64))
        .collect()
}

/// Mean binomial deviance (-2 loglik / n) of linear predictors.
pub fn deviance(etas: &[f64], y: &[u8]) -> f64 {
    let n = etas.len() as f64;
    etas.iter()
        .zip(y)
        .map(|(&eta, &yi)| {
            let p = logistic(eta).clamp(1e-12, 1.0 - 1e-12);
            -2.0 * if yi == 1 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum::<f64>()
        / n
}

/// Sweeps between stagnation checks in the inner loop.
const STALL_CHECK_INTERVAL: usize = 25;
/// Contraction below 2x per check interval marks a degenerate direction.
const STALL_FACTOR: f64 = 0.5;
/// Stagnation is only accepted while the objective-decrease bound is small.
const STALL_ENERGY_CAP: f64 = 1e-6;

/// Fits the penalized fit at one lambda by IRLS + coordinate descent,
/// starting from the given warm coefficients.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_at_lambda(
    x: &[Vec<f64>],
    y: &[u8],
    lambda: f64,
    beta0: &mut f64,
    beta: &mut [f64],
    opts: &LassoOptions,
) -> Result<()> {
    let n = y.len();
    let nf = n as f64;
    let k = x.len();

    let mut eta: Vec<f64> = (0..n)
        .map(|i| {
            let mut e = *beta0;
            for j in 0..k {
                if beta[j] != 0.0 {
                    e += beta[j] * x[j][i];
                }
            }
            e
        })
        .collect();

    let mut prev_obj = f64::INFINITY;
    for _ in 0..opts.max_irls {
        // IRLS linearization at the current fit
        let mut w = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let p = logistic(eta[i]);
            let wi = (p * (1.0 - p)).max(1e-5);
            w[i] = wi;
            z[i] = eta[i] + (y[i] as f64 - p) / wi;
        }
        let wsum: f64 = w.iter().sum();
        let wx2: Vec<f64> = x
            .iter()
            .map(|col| col.iter().zip(&w).map(|(&xi, &wi)| wi * xi * xi).sum::<f64>() / nf)
            .collect();

        // residual of the weighted least-squares subproblem
        let mut res: Vec<f64> = (0..n).map(|i| z[i] - eta[i]).collect();

        let mut sweeps = 0usize;
        let mut active_only = false;
        let mut stall_delta = f64::INFINITY;
        loop {
            sweeps += 1;
            if sweeps > opts.max_cd_sweeps {
                return Err(Error::Estimation(format!(
                    "coordinate descent did not converge at lambda = {lambda:.6e}"
                )));
            }
            let mut max_delta: f64 = 0.0;
            let mut max_energy: f64 = 0.0;
            // intercept (unpenalized)
            let db0 = res.iter().zip(&w).map(|(&r, &wi)| wi * r).sum::<f64>() / wsum;
            if db0 != 0.0 {
                *beta0 += db0;
                for r in res.iter_mut() {
                    *r -= db0;
                }
                max_delta = max_delta.max(db0.abs());
                max_energy = max_energy.max(wsum / nf * db0 * db0);
            }
            let mut activated = false;
            for j in 0..k {
                if active_only && beta[j] == 0.0 {
                    continue;
                }
                let col = &x[j];
                let grad = col
                    .iter()
                    .zip(&w)
                    .zip(&res)
                    .map(|((&xi, &wi), &r)| wi * xi * r)
                    .sum::<f64>()
                    / nf;
                let old = beta[j];
                let new = soft_threshold(grad + wx2[j] * old, lambda) / wx2[j];
                if new != old {
                    let d = new - old;
                    beta[j] = new;
                    for (r, &xi) in res.iter_mut().zip(col) {
                        *r -= d * xi;
                    }
                    max_delta = max_delta.max(d.abs());
                    max_energy = max_energy.max(wx2[j] * d * d);
                    if old == 0.0 {
                        activated = true;
                    }
                }
            }
            // near-collinear designs contract arbitrarily slowly under
            // cyclic descent while the objective is already flat; accept a
            // stagnating sweep once the per-sweep objective-decrease bound
            // (max_j wx2_j d_j^2) is negligible
            if sweeps % STALL_CHECK_INTERVAL == 0 {
                if max_delta > STALL_FACTOR * stall_delta && max_energy < STALL_ENERGY_CAP {
                    break;
                }
                stall_delta = max_delta;
            }
            if max_delta < opts.cd_tol {
                if active_only {
                    // confirm with one full sweep over all coordinates
                    active_only = false;
                } else {
                    break;
                }
            } else if !activated {
                active_only = true;
            }
        }

        for i in 0..n {
            eta[i] = z[i] - res[i];
        }
        let obj = deviance(&eta, y) / 2.0 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
        if (prev_obj - obj).abs() < 1e-12 * (1.0 + obj.abs()) {
            break;
        }
        prev_obj = obj;
    }
    Ok(())
}

/// Fits the whole descending path with warm starts.
pub fn lasso_path(
    x: &[Vec<f64>],
    y: &[u8],
    lambdas: &[f64],
    opts: &LassoOptions,
) -> Result<Vec<PathPoint>> {
    let pos = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    let mut beta0 = logit(pos);
    let mut beta = vec![0.0; x.len()];
    let mut path = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        fit_at_lambda(x, y, lambda, &mut beta0, &mut beta, opts)?;
        path.push(PathPoint {
            lambda,
            beta0,
            beta: beta.clone(),
        });
    }
    Ok(path)
}

/// Fitted lasso model. Coefficients are stored on the original covariate
/// scale; the standardized pair is kept for prediction and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoModel {
    pub schema: ColumnSchema,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub beta0_std: f64,
    pub beta_std: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// mean held-out deviance per lambda
    pub cv_curve: Vec<f64>,
    pub lambda_min: f64,
}

impl LassoModel {
    pub fn predict_standardized(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let n = x.first().map_or(0, |c| c.len());
        (0..n)
            .map(|i| {
                let mut eta = self.beta0_std;
                for (j, b) in self.beta_std.iter().enumerate() {
                    if *b != 0.0 {
                        eta += b * x[j][i];
                    }
                }
                logistic(eta)
            })
            .collect()
    }
}

/// Converts standardized coefficients to the original covariate scale.
fn destandardize(schema: &ColumnSchema, beta0_std: f64, beta_std: &[f64]) -> (f64, Vec<f64>) {
    let mut beta0 = beta0_std;
    let mut beta = Vec::with_capacity(beta_std.len());
    for (j, &b) in beta_std.iter().enumerate() {
        let bj = b / schema.sds[j];
        beta0 -= bj * schema.means[j];
        beta.push(bj);
    }
    (beta0, beta)
}

/// Full lasso fit: path over the lambda grid, stratified CV deviance curve,
/// `lambda.min` selection.
pub fn fit_lasso(data: &Dataset, opts: &LassoOptions, seed: u64) -> Result<LassoModel> {
    if !data.both_classes_present() {
        return Err(Error::Estimation("single-class response; cannot fit lasso".into()));
    }
    let lambdas = lambda_grid(&data.x, &data.y, opts.n_lambda, opts.lambda_min_ratio);
    let path = lasso_path(&data.x, &data.y, &lambdas, opts)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let folds = stratified_folds(&data.y, opts.cv_folds, &mut rng);
    let mut cv_sum = vec![0.0; lambdas.len()];
    for fold in 0..opts.cv_folds {
        let train: Vec<usize> = (0..data.n_rows()).filter(|i| folds[*i] != fold).collect();
        let test: Vec<usize> = (0..data.n_rows()).filter(|i| folds[*i] == fold).collect();
        if test.is_empty() {
            continue;
        }
        let dtrain = data.subset(&train);
        let fold_path = lasso_path(&dtrain.x, &dtrain.y, &lambdas, opts)?;
        for (li, point) in fold_path.iter().enumerate() {
            let etas: Vec<f64> = test.iter().map(|&i| point.eta(&data.x, i)).collect();
            let ytest: Vec<u8> = test.iter().map(|&i| data.y[i]).collect();
            cv_sum[li] += deviance(&etas, &ytest) * test.len() as f64;
        }
    }
    let cv_curve: Vec<f64> = cv_sum
        .iter()
        .map(|s| s / data.n_rows() as f64)
        .collect();
    let best = cv_curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    let chosen = &path[best];
    let (beta0, beta) = destandardize(&data.schema, chosen.beta0, &chosen.beta);
    Ok(LassoModel {
        schema: data.schema.clone(),
        beta0,
        beta,
        beta0_std: chosen.beta0,
        beta_std: chosen.beta.clone(),
        lambda_grid: lambdas,
        cv_curve,
        lambda_min: chosen.lambda,
    })
}

/// KKT violation magnitude of a path point: for active columns the score
/// |x_j'(y-p)/n| must equal lambda, for inactive ones it must not exceed it.
pub fn kkt_violation(x: &[Vec<f64>], y: &[u8], point: &PathPoint) -> f64 {
    let n = y.len();
    let nf = n as f64;
    let p: Vec<f64> = (0..n).map(|i| logistic(point.eta(x, i))).collect();
    let mut worst: f64 = 0.0;
    for (j, col) in x.iter().enumerate() {
        let score = col
            .iter()
            .enumerate()
            .map(|(i, &xi)| xi * (y[i] as f64 - p[i]))
            .sum::<f64>()
            / nf;
        let v = if point.beta[j] != 0.0 {
            (score - point.lambda * point.beta[j].signum()).abs()
        } else {
            (score.abs() - point.lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn synth_dataset(n: usize, k: usize, seed: u64, informative: &[(usize, f64)]) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let eta: f64 =
                    -0.5 + informative.iter().map(|&(j, b)| b * columns[j][i]).sum::<f64>();
                u8::from(rng.gen::<f64>() < logistic(eta))
            })
            .collect();
        let names = (0..k).map(|j| format!("c{j}")).collect();
        Dataset::new(names, columns, y).unwrap()
    }

    #[test]
    fn lambda_max_gives_intercept_only() {
        let d = synth_dataset(300, 10, 1, &[(0, 1.5)]);
        let lmax = lambda_max(&d.x, &d.y);
        let opts = LassoOptions::default();
        let path = lasso_path(&d.x, &d.y, &[lmax * 1.01, lmax], &opts).unwrap();
        for p in &path {
            assert!(p.beta.iter().all(|&b| b == 0.0), "slopes at lambda_max must be zero");
            let expect = logit(d.positive_rate());
            assert!((p.beta0 - expect).abs() < 1e-6, "{} vs {expect}", p.beta0);
        }
    }

    #[test]
    fn single_covariate_matches_scalar_oracle() {
        // golden-section minimization of the 1-D penalized deviance as an
        // independent oracle for the coordinate-descent solution
        let d = synth_dataset(400, 1, 2, &[(0, 1.0)]);
        let lambda = 0.02;
        let opts = LassoOptions::default();
        let path = lasso_path(&d.x, &d.y, &[lambda], &opts).unwrap();
        let fitted = path[0].beta[0];

        let objective = |b: f64| {
            // profile out the intercept by an inner 1-D optimization
            let prof = |b0: f64| {
                let etas: Vec<f64> = d.x[0].iter().map(|&xi| b0 + b * xi).collect();
                deviance(&etas, &d.y) / 2.0 + lambda * b.abs()
            };
            golden(prof, -5.0, 5.0)
        };
        let oracle = {
            // outer golden-section over the slope
            let mut lo = -3.0;
            let mut hi = 3.0;
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if objective(m1) < objective(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            (lo + hi) / 2.0
        };
        assert!(
            (fitted - oracle).abs() < 1e-6,
            "cd {fitted} vs golden-section {oracle}"
        );
    }

    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f((lo + hi) / 2.0)
    }

    #[test]
    fn true_columns_have_largest_coefficients() {
        let d = synth_dataset(2000, 200, 3, &[(3, 2.0), (77, -2.0), (150, 1.8)]);
        let model = fit_lasso(&d, &LassoOptions { cv_folds: 10, n_lambda: 50, ..Default::default() }, 42).unwrap();
        let mut idx: Vec<usize> = (0..d.n_cols()).collect();
        idx.sort_by(|&a, &b| {
            model.beta_std[b]
                .abs()
                .partial_cmp(&model.beta_std[a].abs())
                .unwrap()
        });
        let top3: std::collections::BTreeSet<usize> = idx[..3].iter().copied().collect();
        assert_eq!(top3, [3, 77, 150].into_iter().collect());
    }

    #[test]
    fn kkt_holds_along_path() {
        let d = synth_dataset(500, 50, 4, &[(0, 1.5), (10, -1.0)]);
        let lambdas = lambda_grid(&d.x, &d.y, 30, 1e-3);
        let opts = LassoOptions::default();
        let path = lasso_path(&d.x, &d.y, &lambdas, &opts).unwrap();
        for point in &path {
            let v = kkt_violation(&d.x, &d.y, point);
            assert!(v < 1e-6, "KKT violation {v:.2e} at lambda {:.3e}", point.lambda);
        }
    }

    #[test]
    fn training_deviance_non_increasing_along_path() {
        let d = synth_dataset(400, 20, 5, &[(0, 1.0)]);
        let lambdas = lambda_grid(&d.x, &d.y, 40, 1e-3);
        let path = lasso_path(&d.x, &d.y, &lambdas, &LassoOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for p in &path {
            let etas: Vec<f64> = (0..d.n_rows()).map(|i| p.eta(&d.x, i)).collect();
            let dev = deviance(&etas, &d.y);
            assert!(dev <= prev + 1e-8, "deviance rose along path: {prev} -> {dev}");
            prev = dev;
        }
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new(
            vec!["a".into()],
            vec![vec![0.0, 1.0, 2.0]],
            vec![1, 1, 1],
        )
        .unwrap();
        assert!(fit_lasso(&d, &LassoOptions::default(), 1).is_err());
    }

    #[test]
    fn near_collinear_design_still_fits() {
        // exact negations, exact scalar multiples, and rho ~ 0.9999 pairs,
        // as produced by differencing features over a smooth field
        let n = 600;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let neg: Vec<f64> = base.iter().map(|v| -v).collect();
        let scaled: Vec<f64> = base.iter().map(|v| 4.0 * v).collect();
        let close: Vec<f64> = base.iter().map(|v| v + 0.01 * (rng.gen::<f64>() - 0.5)).collect();
        let indep: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<u8> = (0..n)
            .map(|i| u8::from(rng.gen::<f64>() < logistic(-0.5 + 2.0 * base[i])))
            .collect();
        let names = ["base", "neg", "scaled", "close", "indep"]
            .map(String::from)
            .to_vec();
        let d = Dataset::new(names, vec![base, neg, scaled, close, indep], y).unwrap();
        let opts = LassoOptions { cv_folds: 5, n_lambda: 50, ..Default::default() };
        let m = fit_lasso(&d, &opts, 2).unwrap();
        // the fitted probabilities still track the signal
        let p = m.predict_standardized(&d.x);
        let pos_mean = p.iter().zip(&d.y).filter(|(_, &y)| y == 1).map(|(v, _)| v).sum::<f64>()
            / d.y.iter().filter(|&&v| v == 1).count() as f64;
        let neg_mean = p.iter().zip(&d.y).filter(|(_, &y)| y == 0).map(|(v, _)| v).sum::<f64>()
            / d.y.iter().filter(|&&v| v == 0).count() as f64;
        assert!(pos_mean > neg_mean + 0.1, "{pos_mean} vs {neg_mean}");
    }

    #[test]
    fn rescaling_invariance_of_predictions() {
        let d = synth_dataset(500, 5, 6, &[(0, 1.2)]);
        let opts = LassoOptions { cv_folds: 5, n_lambda: 30, ..Default::default() };
        let m1 = fit_lasso(&d, &opts, 9).unwrap();

        // rebuild the dataset with column 0 affinely rescaled
        let names = d.schema.names.clone();
        let mut columns: Vec<Vec<f64>> = (0..d.n_cols())
            .map(|j| {
                d.x[j]
                    .iter()
                    .map(|v| v * d.schema.sds[j] + d.schema.means[j])
                    .collect()
            })
            .collect();
        for v in columns[0].iter_mut() {
            *v = *v * 37.5 - 4.0;
        }
        let d2 = Dataset::new(names.clone(), columns.clone(), d.y.clone()).unwrap();
        let m2 = fit_lasso(&d2, &opts, 9).unwrap();

        let p1 = LearnerModelForTest(&m1).predict(&names, &{
            let mut orig: Vec<Vec<f64>> = (0..d.n_cols())
                .map(|j| {
                    d.x[j]
                        .iter()
                        .map(|v| v * d.schema.sds[j] + d.schema.means[j])
                        .collect()
                })
                .collect();
            orig[0] = columns[0].iter().map(|v| (v + 4.0) / 37.5).collect();
            orig
        });
        let p2 = LearnerModelForTest(&m2).predict(&names, &columns);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    struct LearnerModelForTest<'a>(&'a LassoModel);

    impl LearnerModelForTest<'_> {
        fn predict(&self, names: &[String], columns: &[Vec<f64>]) -> Vec<f64> {
            let x = self.0.schema.standardize_input(names, columns).unwrap();
            self.0.predict_standardized(&x)
        }
    }
}
