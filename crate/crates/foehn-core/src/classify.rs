//! Foehn classification from paired valley/crest observations: wind-sector
//! precondition, dry-adiabatic potential temperature difference, and a
//! two-component Gaussian mixture with a concomitant logistic model,
//! estimated by EM. Output is a 10-min posterior probability series.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::data_io::ObservationSeries;
use crate::time::{format_utc, TimeAxis};
use crate::{Error, Result};

/// Directed wind sector, closed arc from `from_deg` clockwise to `to_deg`;
/// `from > to` means the sector wraps through north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct WindSector {
    pub from_deg: f64,
    pub to_deg: f64,
}

impl From<(f64, f64)> for WindSector {
    fn from((from_deg, to_deg): (f64, f64)) -> Self {
        WindSector { from_deg, to_deg }
    }
}

impl From<WindSector> for (f64, f64) {
    fn from(s: WindSector) -> Self {
        (s.from_deg, s.to_deg)
    }
}

/// True iff `dd` lies in the closed directed arc of `sector`.
pub fn sector_contains(dd: f64, sector: WindSector) -> Result<bool> {
    if !(0.0..360.0).contains(&dd) {
        return Err(Error::Value(format!("dd {dd} out of [0, 360)")));
    }
    let (a, b) = (sector.from_deg, sector.to_deg);
    Ok(if a <= b {
        (a..=b).contains(&dd)
    } else {
        dd >= a || dd <= b
    })
}

/// Dry-adiabatic potential temperature difference between valley and crest.
/// `dh` is the altitude of the crest minus the altitude of the valley.
pub fn delta_theta(t_valley: f64, t_crest: f64, dh: f64) -> f64 {
    t_valley - t_crest - 0.01 * dh
}

/// Per-slot precondition over intersected series: `None` when any required
/// channel (valley dd/t/rh/ff, crest dd/t) is missing, otherwise whether both
/// sector tests pass.
pub fn precondition_mask(
    valley: &ObservationSeries,
    crest: &ObservationSeries,
    valley_sector: WindSector,
    crest_sector: WindSector,
) -> Result<(TimeAxis, Vec<Option<bool>>)> {
    let axis = valley
        .axis
        .intersect(&crest.axis)
        .ok_or_else(|| Error::Value("valley and crest series have disjoint time ranges".into()))?;
    let mut mask = Vec::with_capacity(axis.len);
    for t in axis.iter() {
        let v = valley.at_time(t).expect("intersected axis");
        let c = crest.at_time(t).expect("intersected axis");
        let slot = match (v.dd, v.t, v.rh, v.ff, c.dd, c.t) {
            (Some(vdd), Some(_), Some(_), Some(_), Some(cdd), Some(_)) => Some(
                sector_contains(vdd, valley_sector)? && sector_contains(cdd, crest_sector)?,
            ),
            _ => None,
        };
        mask.push(slot);
    }
    Ok((axis, mask))
}

/// EM tuning knobs; defaults as documented in the config schema.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    pub min_sample: usize,
    /// relative log-likelihood gain below which EM stops
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            min_sample: 500,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// Fitted two-component mixture. Component 2 is the foehn component,
/// labeled so that `mu2 > mu1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureParams {
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    /// concomitant coefficients (intercept, rh, ff) on standardized scale
    pub alpha: [f64; 3],
    /// standardization of the concomitants over the masked training sample
    pub rh_mean: f64,
    pub rh_sd: f64,
    pub ff_mean: f64,
    pub ff_sd: f64,
    pub loglik_trace: Vec<f64>,
    pub n_used: usize,
}

fn normal_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Design {
    y: Vec<f64>,
    /// standardized concomitant rows [1, rh_z, ff_z]
    x: Vec<[f64; 3]>,
}

fn pi_of(x: &[f64; 3], alpha: &[f64; 3]) -> f64 {
    logistic(x[0] * alpha[0] + x[1] * alpha[1] + x[2] * alpha[2])
}

fn loglik(d: &Design, mu1: f64, s1: f64, mu2: f64, s2: f64, alpha: &[f64; 3]) -> f64 {
    d.y.iter()
        .zip(&d.x)
        .map(|(&y, x)| {
            let pi = pi_of(x, alpha);
            let dens = (1.0 - pi) * normal_pdf(y, mu1, s1) + pi * normal_pdf(y, mu2, s2);
            dens.max(1e-300).ln()
        })
        .sum()
}

/// Expected concomitant log-likelihood for responsibilities `r` (the part of
/// Q that depends on alpha).
fn concomitant_q(d: &Design, r: &[f64], alpha: &[f64; 3]) -> f64 {
    d.x.iter()
        .zip(r)
        .map(|(x, &ri)| {
            let pi = pi_of(x, alpha).clamp(1e-12, 1.0 - 1e-12);
            ri * pi.ln() + (1.0 - ri) * (1.0 - pi).ln()
        })
        .sum()
}

/// Weighted logistic IRLS step(s) for the concomitant model, with step
/// halving so the M-step never decreases Q.
fn update_alpha(d: &Design, r: &[f64], alpha: &mut [f64; 3]) {
    for _ in 0..25 {
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for (x, &ri) in d.x.iter().zip(r) {
            let pi = pi_of(x, alpha);
            let xv = Vector3::new(x[0], x[1], x[2]);
            grad += xv * (ri - pi);
            hess += xv * xv.transpose() * (pi * (1.0 - pi)).max(1e-10);
        }
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => return,
        };
        let q0 = concomitant_q(d, r, alpha);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand = [
                alpha[0] + scale * step[0],
                alpha[1] + scale * step[1],
                alpha[2] + scale * step[2],
            ];
            if concomitant_q(d, r, &cand) >= q0 {
                *alpha = cand;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.norm() < 1e-9 {
            return;
        }
    }
}

/// Fits the two-component mixture with concomitants by EM on an
/// already-masked sample of (delta-theta, rh, ff) triples.
pub fn em_fit(y: &[f64], rh: &[f64], ff: &[f64], opts: &EmOptions) -> Result<MixtureParams> {
    // initialize by median split: lower half -> component 1
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let init: Vec<f64> = y.iter().map(|&v| if v > median { 1.0 } else { 0.0 }).collect();
    em_fit_from_init(y, rh, ff, &init, opts)
}

pub(crate) fn em_fit_from_init(
    y: &[f64],
    rh: &[f64],
    ff: &[f64],
    init_resp: &[f64],
    opts: &EmOptions,
) -> Result<MixtureParams> {
    let n = y.len();
    if n < opts.min_sample {
        return Err(Error::Estimation(format!(
            "masked sample size {n} below minimum {}",
            opts.min_sample
        )));
    }
    if y.iter().chain(rh).chain(ff).any(|v| !v.is_finite()) {
        return Err(Error::Value("non-finite value in EM inputs".into()));
    }

    let (rh_mean, rh_sd) = mean_sd(rh);
    let (ff_mean, ff_sd) = mean_sd(ff);
    let rh_sd = if rh_sd > 0.0 { rh_sd } else { 1.0 };
    let ff_sd = if ff_sd > 0.0 { ff_sd } else { 1.0 };
    let d = Design {
        y: y.to_vec(),
        x: rh
            .iter()
            .zip(ff)
            .map(|(&r, &f)| [1.0, (r - rh_mean) / rh_sd, (f - ff_mean) / ff_sd])
            .collect(),
    };

    let weighted_moments = |r: &[f64], flip: bool| -> (f64, f64) {
        let mut sw = 0.0;
        let mut sy = 0.0;
        for (&yi, &ri) in d.y.iter().zip(r) {
            let w = if flip { 1.0 - ri } else { ri };
            sw += w;
            sy += w * yi;
        }
        let mu = sy / sw.max(1e-300);
        let mut sv = 0.0;
        for (&yi, &ri) in d.y.iter().zip(r) {
            let w = if flip { 1.0 - ri } else { ri };
            sv += w * (yi - mu).powi(2);
        }
        (mu, (sv / sw.max(1e-300)).sqrt())
    };

    let mut r = init_resp.to_vec();
    let (mut mu1, mut s1) = weighted_moments(&r, true);
    let (mut mu2, mut s2) = weighted_moments(&r, false);
    let p2 = r.iter().sum::<f64>() / n as f64;
    let mut alpha = [
        (p2.clamp(1e-6, 1.0 - 1e-6) / (1.0 - p2.clamp(1e-6, 1.0 - 1e-6))).ln(),
        0.0,
        0.0,
    ];

    let check_sigma = |s: f64, which: usize| -> Result<()> {
        if s < 1e-3 {
            Err(Error::DegenerateFit(format!(
                "component {which} collapsed (sigma = {s:.3e})"
            )))
        } else {
            Ok(())
        }
    };
    check_sigma(s1, 1)?;
    check_sigma(s2, 2)?;

    let mut trace = vec![loglik(&d, mu1, s1, mu2, s2, &alpha)];
    for _ in 0..opts.max_iter {
        // E step
        for (i, (&yi, x)) in d.y.iter().zip(&d.x).enumerate() {
            let pi = pi_of(x, &alpha);
            let d2 = pi * normal_pdf(yi, mu2, s2);
            let d1 = (1.0 - pi) * normal_pdf(yi, mu1, s1);
            r[i] = d2 / (d1 + d2).max(1e-300);
        }
        // M step
        (mu1, s1) = weighted_moments(&r, true);
        (mu2, s2) = weighted_moments(&r, false);
        check_sigma(s1, 1)?;
        check_sigma(s2, 2)?;
        update_alpha(&d, &r, &mut alpha);

        let ll = loglik(&d, mu1, s1, mu2, s2, &alpha);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if (ll - prev).abs() < opts.tol * (1.0 + prev.abs()) {
            break;
        }
    }

    // component 2 is foehn: the larger delta-theta mean
    if mu2 < mu1 {
        std::mem::swap(&mut mu1, &mut mu2);
        std::mem::swap(&mut s1, &mut s2);
        for a in &mut alpha {
            *a = -*a;
        }
    }

    Ok(MixtureParams {
        mu1,
        sigma1: s1,
        mu2,
        sigma2: s2,
        alpha,
        rh_mean,
        rh_sd,
        ff_mean,
        ff_sd,
        loglik_trace: trace,
        n_used: n,
    })
}

/// Posterior foehn probability for one observation on the original scale.
pub fn posterior(y: f64, rh: f64, ff: f64, params: &MixtureParams) -> f64 {
    let x = [
        1.0,
        (rh - params.rh_mean) / params.rh_sd,
        (ff - params.ff_mean) / params.ff_sd,
    ];
    let pi = pi_of(&x, &params.alpha);
    posterior_with_pi(y, pi, params)
}

/// Posterior with an explicit concomitant probability, used by tests.
pub fn posterior_with_pi(y: f64, pi: f64, params: &MixtureParams) -> f64 {
    let d2 = pi * normal_pdf(y, params.mu2, params.sigma2);
    let d1 = (1.0 - pi) * normal_pdf(y, params.mu1, params.sigma1);
    if d1 + d2 == 0.0 {
        return 0.0;
    }
    d2 / (d1 + d2)
}

/// 10-min posterior series. Slots partition into missing (required inputs
/// absent), precondition-false (p = 0), and precondition-true (p posterior).
#[derive(Debug, Clone)]
pub struct PosteriorSeries {
    pub axis: TimeAxis,
    pub p: Vec<Option<f64>>,
    pub precondition: Vec<Option<bool>>,
    pub params: MixtureParams,
}

/// Station pairing needed for classification.
#[derive(Debug, Clone, Copy)]
pub struct ClassifySetup {
    pub valley_sector: WindSector,
    pub crest_sector: WindSector,
    /// altitude(crest) - altitude(valley), meters
    pub dh: f64,
}

/// Full classification chain: precondition mask, EM fit on masked slots,
/// posterior per slot.
pub fn classify_series(
    valley: &ObservationSeries,
    crest: &ObservationSeries,
    setup: &ClassifySetup,
    opts: &EmOptions,
) -> Result<PosteriorSeries> {
    let (axis, mask) = precondition_mask(valley, crest, setup.valley_sector, setup.crest_sector)?;

    let mut y = Vec::new();
    let mut rh = Vec::new();
    let mut ff = Vec::new();
    for (i, t) in axis.iter().enumerate() {
        if mask[i] == Some(true) {
            let v = valley.at_time(t).unwrap();
            let c = crest.at_time(t).unwrap();
            y.push(delta_theta(v.t.unwrap(), c.t.unwrap(), setup.dh));
            rh.push(v.rh.unwrap());
            ff.push(v.ff.unwrap());
        }
    }
    let params = em_fit(&y, &rh, &ff, opts)?;

    let mut p = Vec::with_capacity(axis.len);
    for (i, t) in axis.iter().enumerate() {
        p.push(match mask[i] {
            None => None,
            Some(false) => Some(0.0),
            Some(true) => {
                let v = valley.at_time(t).unwrap();
                let c = crest.at_time(t).unwrap();
                let dth = delta_theta(v.t.unwrap(), c.t.unwrap(), setup.dh);
                Some(posterior(dth, v.rh.unwrap(), v.ff.unwrap(), &params))
            }
        });
    }
    Ok(PosteriorSeries {
        axis,
        p,
        precondition: mask,
        params,
    })
}

/// Posterior series export: `timestamp,p,precondition`, empty fields for missing.
pub fn write_posteriors<W: Write>(series: &PosteriorSeries, mut w: W) -> Result<()> {
    writeln!(w, "timestamp,p,precondition")?;
    for (i, t) in series.axis.iter().enumerate() {
        let p = series.p[i].map(|v| format!("{v}")).unwrap_or_default();
        let pre = series.precondition[i]
            .map(|b| if b { "1" } else { "0" }.to_string())
            .unwrap_or_default();
        writeln!(w, "{},{},{}", format_utc(t), p, pre)?;
    }
    Ok(())
}

/// Parses the posterior CSV written by `write_posteriors`. The mixture
/// parameters are not part of the CSV and must be supplied separately.
pub fn read_posteriors<R: std::io::BufRead>(r: R, params: MixtureParams) -> Result<PosteriorSeries> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty posterior table".into()))??;
    if header.trim() != "timestamp,p,precondition" {
        return Err(Error::Integrity(format!(
            "unexpected posterior header {:?}",
            header.trim()
        )));
    }
    let mut times = Vec::new();
    let mut p = Vec::new();
    let mut precondition = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Integrity(format!(
                "posterior row needs 3 fields, found {}",
                cols.len()
            )));
        }
        times.push(crate::time::parse_utc(cols[0])?);
        p.push(match cols[1].trim() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| {
                Error::Integrity(format!("invalid posterior value {s:?}"))
            })?),
        });
        precondition.push(match cols[2].trim() {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            s => return Err(Error::Integrity(format!("invalid precondition flag {s:?}"))),
        });
    }
    if times.is_empty() {
        return Err(Error::Integrity("posterior table has no rows".into()));
    }
    let axis = TimeAxis::new(times[0], crate::time::TEN_MIN_SECS, times.len());
    for (i, t) in times.iter().enumerate() {
        if *t != axis.at(i) {
            return Err(Error::Integrity(format!(
                "posterior rows leave the 10-min grid at {t}"
            )));
        }
    }
    Ok(PosteriorSeries {
        axis,
        p,
        precondition,
        params,
    })
}
