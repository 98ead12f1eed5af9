//! Applies the 24 fitted hour-of-day models across a gap-free hourly span to
//! produce reconstructed foehn probabilities, plus the annual summary report.

use std::io::Write;

use chrono::{Datelike, Timelike};

use crate::aggregate::{daily_max, periodic_mean, HourlyLabelSeries, Label, Period};
use crate::aggregate::HourlyProbSeries;
use crate::features::{FeatureTable, VariableSet};
use crate::learners::{LearnerKind, LearnerModel};
use crate::time::{format_utc, hourly_span, TimeAxis};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub station: String,
    pub learner: LearnerKind,
    pub set: VariableSet,
    pub times: TimeAxis,
    pub p: Vec<f64>,
}

impl Reconstruction {
    pub fn as_prob_series(&self) -> HourlyProbSeries {
        HourlyProbSeries {
            axis: self.times.clone(),
            p: self.p.iter().map(|&v| Some(v)).collect(),
        }
    }
}

/// Predicts every hour of `[start_year, end_year]` with the model whose
/// hour-of-day matches the timestamp. All 24 models must be present and the
/// feature table must cover the whole span.
pub fn reconstruct(
    station: &str,
    models: &[Option<LearnerModel>],
    table: &FeatureTable,
    start_year: i32,
    end_year: i32,
) -> Result<Reconstruction> {
    if models.len() != 24 {
        return Err(Error::Contract(format!(
            "need 24 hour-of-day models, got {}",
            models.len()
        )));
    }
    let missing: Vec<String> = (0..24)
        .filter(|&h| models[h].is_none())
        .map(|h| format!("{h:02}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Contract(format!(
            "missing hour-of-day models: {}",
            missing.join(", ")
        )));
    }
    let learner = models[0].as_ref().unwrap().kind();
    if models.iter().flatten().any(|m| m.kind() != learner) {
        return Err(Error::Contract("hour-of-day models mix learner kinds".into()));
    }

    let axis = hourly_span(start_year, end_year);
    // gather rows per hour-of-day, batch-predict, scatter back in time order
    let mut rows_by_hour: Vec<Vec<usize>> = vec![Vec::new(); 24];
    for (i, t) in axis.iter().enumerate() {
        if table.row_at(t).is_none() {
            return Err(Error::Range(format!(
                "feature table does not cover {}",
                format_utc(t)
            )));
        }
        rows_by_hour[t.hour() as usize].push(i);
    }
    let mut p = vec![f64::NAN; axis.len];
    for (hour, rows) in rows_by_hour.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); table.n_cols()];
        for &i in rows {
            let row = table.row_at(axis.at(i)).expect("coverage checked above");
            for (j, v) in row.into_iter().enumerate() {
                columns[j].push(v);
            }
        }
        let model = models[hour].as_ref().unwrap();
        let pred = model.predict(&table.names, &columns)?;
        for (&i, pi) in rows.iter().zip(pred) {
            p[i] = pi;
        }
    }
    Ok(Reconstruction {
        station: station.to_string(),
        learner,
        set: table.variable_set,
        times: axis,
        p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearSummary {
    pub year: i32,
    /// annual mean of the reconstruction's daily maxima
    pub recon_annual_mean: f64,
    /// observation-based annual mean; suppressed below 80% availability
    pub obs_annual_mean: Option<f64>,
    pub obs_availability: Option<f64>,
    /// hours labeled foehn by the observation-based classifier
    pub obs_foehn_hours: Option<usize>,
}

/// Annual means of daily maxima for the reconstruction, set against the
/// observation-based classification where it exists.
pub fn reconstruction_report(
    recon: &Reconstruction,
    observed: Option<&HourlyLabelSeries>,
) -> Vec<YearSummary> {
    let recon_daily = daily_max(&recon.as_prob_series());
    let recon_annual = periodic_mean(&recon_daily, Period::Year, 0.8);

    let obs_annual = observed.map(|labels| {
        let daily = daily_max(&labels.as_probabilities());
        periodic_mean(&daily, Period::Year, 0.8)
    });
    let mut obs_hours: std::collections::BTreeMap<i32, usize> = Default::default();
    if let Some(labels) = observed {
        for (t, l) in labels.axis.iter().zip(&labels.labels) {
            if *l == Some(Label::Foehn) {
                *obs_hours.entry(crate::time::owning_day(t).year()).or_default() += 1;
            }
        }
    }

    let mut out = Vec::new();
    for (i, start) in recon_annual.starts.iter().enumerate() {
        let year = start.year();
        let Some(recon_mean) = recon_annual.values[i] else { continue };
        let (obs_mean, obs_avail) = match &obs_annual {
            Some(series) => {
                match series.starts.iter().position(|s| s.year() == year) {
                    Some(k) => (series.values[k], Some(series.availability[k])),
                    None => (None, None),
                }
            }
            None => (None, None),
        };
        out.push(YearSummary {
            year,
            recon_annual_mean: recon_mean,
            obs_annual_mean: obs_mean,
            obs_availability: obs_avail,
            obs_foehn_hours: observed.map(|_| obs_hours.get(&year).copied().unwrap_or(0)),
        });
    }
    out
}

/// CSV export: `timestamp,p`.
pub fn write_reconstruction<W: Write>(recon: &Reconstruction, mut w: W) -> Result<()> {
    writeln!(w, "timestamp,p")?;
    for (t, p) in recon.times.iter().zip(&recon.p) {
        writeln!(w, "{},{p:.6}", format_utc(t))?;
    }
    Ok(())
}

/// CSV export: `year,recon_annual_mean,obs_annual_mean,obs_availability,obs_foehn_hours`.
pub fn write_year_summaries<W: Write>(rows: &[YearSummary], mut w: W) -> Result<()> {
    writeln!(w, "year,recon_annual_mean,obs_annual_mean,obs_availability,obs_foehn_hours")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.6},{},{},{}",
            r.year,
            r.recon_annual_mean,
            r.obs_annual_mean.map_or(String::new(), |v| format!("{v:.6}")),
            r.obs_availability.map_or(String::new(), |v| format!("{v:.6}")),
            r.obs_foehn_hours.map_or(String::new(), |v| v.to_string()),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{ColumnSchema, LassoModel};
    use crate::time::HOUR_SECS;

    fn intercept_only(beta0: f64) -> LearnerModel {
        LearnerModel::Lasso(LassoModel {
            schema: ColumnSchema {
                names: vec!["x".into()],
                means: vec![0.0],
                sds: vec![1.0],
            },
            beta0,
            beta: vec![0.0],
            beta0_std: beta0,
            beta_std: vec![0.0],
            lambda_grid: vec![],
            cv_curve: vec![],
            lambda_min: 0.0,
        })
    }

    fn table_over(start_year: i32, end_year: i32) -> FeatureTable {
        let times = hourly_span(start_year, end_year);
        let columns = vec![(0..times.len).map(|i| i as f64).collect()];
        FeatureTable {
            times,
            names: vec!["x".into()],
            columns,
            variable_set: VariableSet::Direct,
            dropped_leading: 0,
            dropped_trailing: 0,
        }
    }

    #[test]
    fn eighty_three_year_span_hour_count() {
        let table = table_over(1940, 2022);
        let models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(-0.7))).collect();
        let recon = reconstruct("s", &models, &table, 1940, 2022).unwrap();
        assert_eq!(recon.p.len(), 727_584);
        let expect = 1.0 / (1.0 + 0.7f64.exp());
        assert!(recon.p.iter().all(|&p| (p - expect).abs() < 1e-12));
    }

    #[test]
    fn hour_routing() {
        let table = table_over(2000, 2000);
        let mut models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(0.0))).collect();
        models[7] = Some(intercept_only(2.0));
        let recon = reconstruct("s", &models, &table, 2000, 2000).unwrap();
        for (t, &p) in recon.times.iter().zip(&recon.p) {
            if t.hour() == 7 {
                assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
            } else {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_models_listed() {
        let table = table_over(2000, 2000);
        let mut models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(0.0))).collect();
        models[3] = None;
        models[19] = None;
        let err = reconstruct("s", &models, &table, 2000, 2000).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("03") && msg.contains("19"), "{msg}");
    }

    #[test]
    fn uncovered_span_rejected() {
        let table = table_over(2001, 2001);
        let models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(0.0))).collect();
        assert!(matches!(
            reconstruct("s", &models, &table, 2000, 2001),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn constant_reconstruction_annual_means() {
        let table = table_over(2000, 2002);
        let b0 = -(1.0 / 0.334 - 1.0f64).ln();
        let models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(b0))).collect();
        let recon = reconstruct("s", &models, &table, 2000, 2002).unwrap();
        let report = reconstruction_report(&recon, None);
        // first and last civil day lose an hour to the owning-day convention,
        // so interior years are the clean check
        let mid: Vec<&YearSummary> = report.iter().filter(|r| r.year == 2001).collect();
        assert_eq!(mid.len(), 1);
        assert!((mid[0].recon_annual_mean - 0.334).abs() < 1e-9);
        assert_eq!(mid[0].obs_annual_mean, None);
    }

    #[test]
    fn observed_availability_gate_and_foehn_hours() {
        let table = table_over(2000, 2001);
        let models: Vec<Option<LearnerModel>> =
            (0..24).map(|_| Some(intercept_only(0.0))).collect();
        let recon = reconstruct("s", &models, &table, 2000, 2001).unwrap();

        // observed labels: full coverage in 2000 with 482 foehn hours,
        // ~50% coverage in 2001
        let axis = recon.times.clone();
        let mut labels = Vec::with_capacity(axis.len);
        let mut foehn_left = 482;
        for t in axis.iter() {
            let year = crate::time::owning_day(t).year();
            if year == 2000 {
                if foehn_left > 0 && (t.hour() == 12 || t.hour() == 13) {
                    foehn_left -= 1;
                    labels.push(Some(Label::Foehn));
                } else {
                    labels.push(Some(Label::NoFoehn));
                }
            } else if year == 2001 {
                // half the hours missing kills the 80% daily gate
                labels.push(if t.timestamp() / HOUR_SECS % 2 == 0 {
                    Some(Label::NoFoehn)
                } else {
                    None
                });
            } else {
                labels.push(None);
            }
        }
        let observed = HourlyLabelSeries { axis, labels };
        let report = reconstruction_report(&recon, Some(&observed));
        let y2000 = report.iter().find(|r| r.year == 2000).unwrap();
        assert_eq!(y2000.obs_foehn_hours, Some(482));
        assert!(y2000.obs_annual_mean.is_some());
        let y2001 = report.iter().find(|r| r.year == 2001).unwrap();
        assert_eq!(y2001.obs_annual_mean, None, "sparse year must be suppressed");
    }
}
