//! Regression-based season-trend decomposition of monthly series: a free
//! trend coefficient per month with a second-difference smoothness penalty,
//! plus 12 per-month seasonal sequences over years (their own
//! second-difference penalty across years) constrained to sum to zero within
//! each year. Penalties tuned by generalized cross-validation.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StrOptions {
    /// fixed trend penalty; `None` selects by GCV
    pub lambda_t: Option<f64>,
    /// fixed seasonal penalty; `None` selects by GCV
    pub lambda_s: Option<f64>,
    pub grid: Vec<f64>,
}

impl Default for StrOptions {
    fn default() -> Self {
        StrOptions {
            lambda_t: None,
            lambda_s: None,
            grid: vec![1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrFit {
    pub y: Vec<f64>,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub lambda_t: f64,
    pub lambda_s: f64,
    pub sigma2: f64,
    /// effective degrees of freedom (trace of the smoother matrix)
    pub edf: f64,
    pub gcv: f64,
}

/// Orthonormal basis of the zero-sum subspace of R^12 (normalized Helmert
/// contrasts), as a 12 x 11 matrix.
fn helmert_basis() -> [[f64; 11]; 12] {
    let mut c = [[0.0; 11]; 12];
    for k in 1..12usize {
        let norm = (k as f64 * (k + 1) as f64).sqrt();
        for (m, row) in c.iter_mut().enumerate() {
            row[k - 1] = if m < k {
                1.0 / norm
            } else if m == k {
                -(k as f64) / norm
            } else {
                0.0
            };
        }
    }
    c
}

/// Adds `lambda * D2' D2` over the parameter subsequence `idx` to `a`.
fn add_second_diff_penalty(a: &mut DMatrix<f64>, idx: &[usize], lambda: f64) {
    const STENCIL: [f64; 3] = [1.0, -2.0, 1.0];
    for w in idx.windows(3) {
        for (ai, &ca) in w.iter().zip(&STENCIL) {
            for (bi, &cb) in w.iter().zip(&STENCIL) {
                a[(*ai, *bi)] += lambda * ca * cb;
            }
        }
    }
}

struct Design {
    j: usize,
    n_years: usize,
    c: [[f64; 11]; 12],
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    /// dense p x J copy of X' for trace and variance computations
    xt: DMatrix<f64>,
}

impl Design {
    fn new(y: &[f64]) -> Self {
        let j = y.len();
        let n_years = j.div_ceil(12);
        let p = j + 11 * n_years;
        let c = helmert_basis();
        let mut xt = DMatrix::zeros(p, j);
        for t in 0..j {
            let (u, m) = (t / 12, t % 12);
            xt[(t, t)] = 1.0;
            for k in 0..11 {
                xt[(j + 11 * u + k, t)] = c[m][k];
            }
        }
        let xtx = &xt * xt.transpose();
        let xty = &xt * DVector::from_column_slice(y);
        Design {
            j,
            n_years,
            c,
            xtx,
            xty,
            xt,
        }
    }

    fn penalized(&self, lambda_t: f64, lambda_s: f64) -> DMatrix<f64> {
        let mut a = self.xtx.clone();
        let trend_idx: Vec<usize> = (0..self.j).collect();
        add_second_diff_penalty(&mut a, &trend_idx, lambda_t);
        for k in 0..11 {
            let seq: Vec<usize> = (0..self.n_years).map(|u| self.j + 11 * u + k).collect();
            add_second_diff_penalty(&mut a, &seq, lambda_s);
        }
        a
    }

    /// Solves at one penalty pair; returns (theta, B = A^-1 X', edf, rss, gcv).
    fn solve(&self, y: &[f64], lambda_t: f64, lambda_s: f64) -> Option<Candidate> {
        let a = self.penalized(lambda_t, lambda_s);
        let chol = Cholesky::new(a)?;
        let theta = chol.solve(&self.xty);
        let b = chol.solve(&self.xt);
        // tr(H) = sum_t x_t' (A^-1 x_t), using X's sparsity
        let mut edf = 0.0;
        let mut fitted = vec![0.0; self.j];
        for t in 0..self.j {
            let (u, m) = (t / 12, t % 12);
            let mut ht = b[(t, t)];
            let mut f = theta[t];
            for k in 0..11 {
                let row = self.j + 11 * u + k;
                ht += self.c[m][k] * b[(row, t)];
                f += self.c[m][k] * theta[row];
            }
            edf += ht;
            fitted[t] = f;
        }
        let rss: f64 = y
            .iter()
            .zip(&fitted)
            .map(|(&yi, &fi)| (yi - fi).powi(2))
            .sum();
        let denom = self.j as f64 - edf;
        if denom <= 0.0 {
            return None;
        }
        let gcv = self.j as f64 * rss / (denom * denom);
        Some(Candidate {
            lambda_t,
            lambda_s,
            theta,
            b,
            edf,
            rss,
            gcv,
        })
    }
}

struct Candidate {
    lambda_t: f64,
    lambda_s: f64,
    theta: DVector<f64>,
    b: DMatrix<f64>,
    edf: f64,
    rss: f64,
    gcv: f64,
}

pub fn fit_str(y: &[f64], opts: &StrOptions) -> Result<StrFit> {
    let j = y.len();
    if j < 36 {
        return Err(Error::Estimation(format!(
            "decomposition needs at least 36 monthly values, got {j}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("decomposition input holds non-finite values".into()));
    }
    let design = Design::new(y);

    let pairs: Vec<(f64, f64)> = match (opts.lambda_t, opts.lambda_s) {
        (Some(lt), Some(ls)) => vec![(lt, ls)],
        (Some(lt), None) => opts.grid.iter().map(|&ls| (lt, ls)).collect(),
        (None, Some(ls)) => opts.grid.iter().map(|&lt| (lt, ls)).collect(),
        (None, None) => opts
            .grid
            .iter()
            .flat_map(|&lt| opts.grid.iter().map(move |&ls| (lt, ls)))
            .collect(),
    };
    let best = pairs
        .par_iter()
        .filter_map(|&(lt, ls)| design.solve(y, lt, ls))
        .min_by(|a, b| {
            a.gcv
                .partial_cmp(&b.gcv)
                .unwrap()
                .then(a.lambda_t.partial_cmp(&b.lambda_t).unwrap())
                .then(a.lambda_s.partial_cmp(&b.lambda_s).unwrap())
        })
        .ok_or_else(|| Error::Estimation("no penalty pair produced a solvable system".into()))?;

    let sigma2 = best.rss / (j as f64 - best.edf);
    let mut trend = Vec::with_capacity(j);
    let mut seasonal = Vec::with_capacity(j);
    let mut ci_lower = Vec::with_capacity(j);
    let mut ci_upper = Vec::with_capacity(j);
    for t in 0..j {
        let (u, m) = (t / 12, t % 12);
        let tt = best.theta[t];
        let mut s = 0.0;
        for k in 0..11 {
            s += design.c[m][k] * best.theta[j + 11 * u + k];
        }
        // Var(T_t) = sigma2 * || row t of A^-1 X' ||^2
        let leverage: f64 = (0..j).map(|i| best.b[(t, i)].powi(2)).sum();
        let half = 1.96 * (sigma2 * leverage).sqrt();
        trend.push(tt);
        seasonal.push(s);
        ci_lower.push(tt - half);
        ci_upper.push(tt + half);
    }
    let remainder: Vec<f64> = y
        .iter()
        .zip(trend.iter().zip(&seasonal))
        .map(|(&yi, (&ti, &si))| yi - ti - si)
        .collect();
    Ok(StrFit {
        y: y.to_vec(),
        trend,
        seasonal,
        remainder,
        ci_lower,
        ci_upper,
        lambda_t: best.lambda_t,
        lambda_s: best.lambda_s,
        sigma2,
        edf: best.edf,
        gcv: best.gcv,
    })
}

/// True iff no horizontal line fits inside the 95% band everywhere.
pub fn trend_significance(fit: &StrFit) -> bool {
    let lo_max = fit.ci_lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hi_min = fit.ci_upper.iter().cloned().fold(f64::INFINITY, f64::min);
    lo_max > hi_min
}

/// Per-decade mean seasonal curve (decade 1940 = 1940-1949, last possibly
/// truncated), plus the all-period mean curve.
pub fn decade_seasonal(fit: &StrFit, start_year: i32) -> (BTreeMap<i32, [f64; 12]>, [f64; 12]) {
    let mut sums: BTreeMap<i32, ([f64; 12], [usize; 12])> = BTreeMap::new();
    let mut all = ([0.0f64; 12], [0usize; 12]);
    for (t, &s) in fit.seasonal.iter().enumerate() {
        let (u, m) = (t / 12, t % 12);
        let year = start_year + u as i32;
        let decade = year - year.rem_euclid(10);
        let e = sums.entry(decade).or_insert(([0.0; 12], [0; 12]));
        e.0[m] += s;
        e.1[m] += 1;
        all.0[m] += s;
        all.1[m] += 1;
    }
    let decades = sums
        .into_iter()
        .map(|(d, (sum, cnt))| {
            let mut row = [0.0; 12];
            for m in 0..12 {
                row[m] = if cnt[m] > 0 { sum[m] / cnt[m] as f64 } else { f64::NAN };
            }
            (d, row)
        })
        .collect();
    let mut mean = [0.0; 12];
    for m in 0..12 {
        mean[m] = all.0[m] / all.1[m].max(1) as f64;
    }
    (decades, mean)
}

/// CSV export: `t,year,month,y,trend,ci_lo,ci_hi,seasonal,remainder`.
pub fn write_str_fit<W: Write>(fit: &StrFit, start_year: i32, mut w: W) -> Result<()> {
    writeln!(w, "t,year,month,y,trend,ci_lo,ci_hi,seasonal,remainder")?;
    for t in 0..fit.y.len() {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            t,
            start_year + (t / 12) as i32,
            t % 12 + 1,
            fit.y[t],
            fit.trend[t],
            fit.ci_lower[t],
            fit.ci_upper[t],
            fit.seasonal[t],
            fit.remainder[t]
        )?;
    }
    Ok(())
}

pub fn write_decade_seasonal<W: Write>(
    decades: &BTreeMap<i32, [f64; 12]>,
    mean: &[f64; 12],
    mut w: W,
) -> Result<()> {
    writeln!(w, "month,{},all", decades.keys().map(|d| d.to_string()).collect::<Vec<_>>().join(","))?;
    for m in 0..12 {
        let cells: Vec<String> = decades.values().map(|row| format!("{:.6}", row[m])).collect();
        writeln!(w, "{},{},{:.6}", m + 1, cells.join(","), mean[m])?;
    }
    Ok(())
}
