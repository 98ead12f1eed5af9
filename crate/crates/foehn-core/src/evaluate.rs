//! Blocked two-year cross-validation over a 12-year period, the
//! station × hour-of-day × learner × variable-set training layout, and
//! probabilistic / event scoring.

use std::collections::BTreeSet;
use std::io::Write;

use chrono::{Datelike, Timelike};

use rayon::prelude::*;

use crate::aggregate::{HourlyLabelSeries, Label};
use crate::data_io::LearnerConfigs;
use crate::features::{FeatureTable, VariableSet};
use crate::learners::{
    fit_gbt, fit_lasso, fit_stabsel, Dataset, LearnerKind, LearnerModel,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test_years: (i32, i32),
    pub train_years: Vec<i32>,
}

impl Fold {
    pub fn label(&self) -> String {
        format!("{}-{}", self.test_years.0, self.test_years.1)
    }

    pub fn contains_test_year(&self, year: i32) -> bool {
        year == self.test_years.0 || year == self.test_years.1
    }
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub start_year: i32,
    pub end_year: i32,
    pub folds: Vec<Fold>,
}

/// Six blocked folds: consecutive two-year test spans partitioning the
/// period, the remaining ten years training.
pub fn make_folds(start_year: i32, end_year: i32) -> Result<FoldPlan> {
    let span = end_year - start_year + 1;
    if span != 12 {
        return Err(Error::Config(format!(
            "cross-validation period must cover 12 years in 6 two-year blocks, got {span}"
        )));
    }
    let folds = (0..6)
        .map(|f| {
            let y0 = start_year + 2 * f;
            Fold {
                test_years: (y0, y0 + 1),
                train_years: (start_year..=end_year)
                    .filter(|&y| y != y0 && y != y0 + 1)
                    .collect(),
            }
        })
        .collect();
    Ok(FoldPlan {
        start_year,
        end_year,
        folds,
    })
}

/// A fold is infeasible for a station whose labels never cover the test span.
pub fn fold_feasible(labels: &HourlyLabelSeries, fold: &Fold) -> bool {
    labels
        .axis
        .iter()
        .zip(&labels.labels)
        .any(|(t, l)| l.is_some() && fold.contains_test_year(t.year()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainJob {
    pub station: String,
    pub hour: u32,
    pub learner: LearnerKind,
    pub set: VariableSet,
}

/// One job per (station, hour-of-day, learner, variable set).
pub fn train_layout(
    stations: &[String],
    learners: &[LearnerKind],
    sets: &[VariableSet],
) -> Vec<TrainJob> {
    let mut jobs = Vec::new();
    for station in stations {
        for hour in 0..24u32 {
            for &learner in learners {
                for &set in sets {
                    jobs.push(TrainJob {
                        station: station.clone(),
                        hour,
                        learner,
                        set,
                    });
                }
            }
        }
    }
    jobs
}

/// Mean squared difference between probabilities and binary outcomes.
pub fn brier(p: &[f64], o: &[u8]) -> Result<f64> {
    if p.len() != o.len() || p.is_empty() {
        return Err(Error::Contract(format!(
            "brier needs equal nonempty lengths, got {} and {}",
            p.len(),
            o.len()
        )));
    }
    Ok(p.iter()
        .zip(o)
        .map(|(&pi, &oi)| (pi - oi as f64).powi(2))
        .sum::<f64>()
        / p.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMetrics {
    /// percent; missing when no observed positives exist
    pub fnr: Option<f64>,
    /// percent; missing when no observed negatives exist
    pub fpr: Option<f64>,
    /// percent correct
    pub pc: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

pub fn event_metrics(p: &[f64], o: &[u8], threshold: f64) -> Result<EventMetrics> {
    if p.len() != o.len() || p.is_empty() {
        return Err(Error::Contract("event metrics need equal nonempty lengths".into()));
    }
    if !(0.0..1.0).contains(&threshold) || threshold <= 0.0 {
        return Err(Error::Contract(format!("threshold {threshold} outside (0,1)")));
    }
    let (mut tp, mut fn_, mut fp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&pi, &oi) in p.iter().zip(o) {
        let hit = pi >= threshold;
        match (oi == 1, hit) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let n = p.len() as f64;
    Ok(EventMetrics {
        fnr: (tp + fn_ > 0).then(|| 100.0 * fn_ as f64 / (tp + fn_) as f64),
        fpr: (fp + tn > 0).then(|| 100.0 * fp as f64 / (fp + tn) as f64),
        pc: 100.0 * (tp + tn) as f64 / n,
        tp,
        fn_,
        fp,
        tn,
    })
}

/// Labeled hours of one hour-of-day, joined against the feature table.
pub struct HourRows {
    pub y: Vec<u8>,
    /// original-scale columns, aligned with the table's column names
    pub columns: Vec<Vec<f64>>,
}

pub fn collect_rows(
    labels: &HourlyLabelSeries,
    table: &FeatureTable,
    hour: u32,
    years: Option<&BTreeSet<i32>>,
) -> HourRows {
    let mut y = Vec::new();
    let mut columns = vec![Vec::new(); table.n_cols()];
    for (t, label) in labels.axis.iter().zip(&labels.labels) {
        let Some(label) = label else { continue };
        if t.hour() != hour {
            continue;
        }
        if let Some(ys) = years {
            if !ys.contains(&t.year()) {
                continue;
            }
        }
        let Some(row) = table.row_at(t) else { continue };
        y.push(u8::from(*label == Label::Foehn));
        for (j, v) in row.into_iter().enumerate() {
            columns[j].push(v);
        }
    }
    HourRows { y, columns }
}

/// Dispatches to the configured fitter for one learner kind.
pub fn fit_learner(
    data: &Dataset,
    kind: LearnerKind,
    cfg: &LearnerConfigs,
    seed: u64,
) -> Result<LearnerModel> {
    Ok(match kind {
        LearnerKind::Lasso => LearnerModel::Lasso(fit_lasso(data, &cfg.lasso, seed)?),
        LearnerKind::Stabsel => LearnerModel::Stabsel(fit_stabsel(data, &cfg.stabsel, seed)?),
        LearnerKind::Gbt => LearnerModel::Gbt(fit_gbt(data, &cfg.gbt, seed)?),
    })
}

fn job_seed(seed: u64, learner: LearnerKind, fold: usize, hour: u32) -> u64 {
    let tag = (learner as u64 + 1) * 1_000_000 + (fold as u64 + 1) * 1_000 + hour as u64;
    seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(tag)
}

#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub station: String,
    pub learner: LearnerKind,
    pub set: VariableSet,
    /// "2011-2012" style test span, or "insample"
    pub fold: String,
    /// "train" or "test"
    pub split: String,
    pub brier: f64,
    pub metrics: EventMetrics,
    pub n: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    /// jobs skipped for empty or single-class training sets
    pub skipped: Vec<String>,
}

impl ScoreReport {
    pub fn mean_test_brier(&self, learner: LearnerKind, set: VariableSet) -> Option<f64> {
        let rows: Vec<&ScoreRow> = self
            .rows
            .iter()
            .filter(|r| r.learner == learner && r.set == set && r.split == "test")
            .collect();
        if rows.is_empty() {
            return None;
        }
        let n: usize = rows.iter().map(|r| r.n).sum();
        Some(rows.iter().map(|r| r.brier * r.n as f64).sum::<f64>() / n as f64)
    }
}

enum HourOutcome {
    Skipped(String),
    /// train/test predictions with their outcomes
    Scored([(Vec<f64>, Vec<u8>); 2]),
}

/// Runs the blocked CV for one station and one feature table: per fold and
/// learner, the 24 hour-of-day models are fitted on the train years and
/// their predictions pooled before scoring.
pub fn run_cv(
    station: &str,
    labels: &HourlyLabelSeries,
    table: &FeatureTable,
    plan: &FoldPlan,
    learners: &[LearnerKind],
    cfg: &LearnerConfigs,
    seed: u64,
) -> Result<ScoreReport> {
    let mut report = ScoreReport::default();
    for &learner in learners {
        for (fi, fold) in plan.folds.iter().enumerate() {
            if !fold_feasible(labels, fold) {
                report
                    .skipped
                    .push(format!("{station}/{learner}/{}: no labels in test span", fold.label()));
                continue;
            }
            let train_years: BTreeSet<i32> = fold.train_years.iter().copied().collect();
            let test_years: BTreeSet<i32> =
                [fold.test_years.0, fold.test_years.1].into_iter().collect();
            // the 24 hour-of-day fits are independent jobs; pooling below
            // runs in hour order so the report is deterministic
            let outcomes: Vec<HourOutcome> = (0..24u32)
                .into_par_iter()
                .map(|hour| {
                    let train = collect_rows(labels, table, hour, Some(&train_years));
                    let test = collect_rows(labels, table, hour, Some(&test_years));
                    if train.y.is_empty() {
                        return Ok(HourOutcome::Skipped(format!(
                            "{station}/{learner}/{}/h{hour:02}: empty training set",
                            fold.label()
                        )));
                    }
                    let data =
                        Dataset::new(table.names.clone(), train.columns.clone(), train.y.clone())?;
                    if !data.both_classes_present() {
                        return Ok(HourOutcome::Skipped(format!(
                            "{station}/{learner}/{}/h{hour:02}: single-class training set",
                            fold.label()
                        )));
                    }
                    let model =
                        fit_learner(&data, learner, cfg, job_seed(seed, learner, fi, hour))?;
                    let mut scored: [(Vec<f64>, Vec<u8>); 2] = Default::default();
                    for (split, rows) in [(0usize, &train), (1usize, &test)] {
                        if rows.y.is_empty() {
                            continue;
                        }
                        scored[split].0 = model.predict(&table.names, &rows.columns)?;
                        scored[split].1 = rows.y.clone();
                    }
                    Ok(HourOutcome::Scored(scored))
                })
                .collect::<Result<_>>()?;
            let mut pool: [(Vec<f64>, Vec<u8>); 2] = Default::default();
            for outcome in outcomes {
                match outcome {
                    HourOutcome::Skipped(msg) => report.skipped.push(msg),
                    HourOutcome::Scored(scored) => {
                        for (split, (p, y)) in scored.into_iter().enumerate() {
                            pool[split].0.extend(p);
                            pool[split].1.extend(y);
                        }
                    }
                }
            }
            for (split, name) in [(0usize, "train"), (1usize, "test")] {
                let (p, o) = &pool[split];
                if p.is_empty() {
                    continue;
                }
                report.rows.push(ScoreRow {
                    station: station.to_string(),
                    learner,
                    set: table.variable_set,
                    fold: fold.label(),
                    split: name.to_string(),
                    brier: brier(p, o)?,
                    metrics: event_metrics(p, o, 0.5)?,
                    n: p.len(),
                });
            }
        }
    }
    Ok(report)
}

/// Fits the 24 hour-of-day models on every labeled hour (no holdout), as
/// used for the reconstruction.
pub struct TrainedStation {
    pub models: Vec<Option<LearnerModel>>,
    pub skipped: Vec<String>,
}

pub fn train_full_period(
    station: &str,
    labels: &HourlyLabelSeries,
    table: &FeatureTable,
    learner: LearnerKind,
    cfg: &LearnerConfigs,
    seed: u64,
) -> Result<TrainedStation> {
    let fitted: Vec<(Option<LearnerModel>, Option<String>)> = (0..24u32)
        .into_par_iter()
        .map(|hour| {
            let rows = collect_rows(labels, table, hour, None);
            if rows.y.is_empty() {
                return Ok((
                    None,
                    Some(format!("{station}/{learner}/h{hour:02}: empty training set")),
                ));
            }
            let data = Dataset::new(table.names.clone(), rows.columns, rows.y)?;
            if !data.both_classes_present() {
                return Ok((
                    None,
                    Some(format!("{station}/{learner}/h{hour:02}: single-class training set")),
                ));
            }
            let model = fit_learner(&data, learner, cfg, job_seed(seed, learner, 99, hour))?;
            Ok((Some(model), None))
        })
        .collect::<Result<_>>()?;
    let mut models = Vec::with_capacity(24);
    let mut skipped = Vec::new();
    for (model, skip) in fitted {
        models.push(model);
        skipped.extend(skip);
    }
    Ok(TrainedStation { models, skipped })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

pub fn write_score_report<W: Write>(report: &ScoreReport, mut w: W) -> Result<()> {
    writeln!(w, "station,learner,set,fold,split,brier,fnr,fpr,pc,n")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{},{},{:.6},{}",
            r.station,
            r.learner,
            r.set,
            r.fold,
            r.split,
            r.brier,
            fmt_opt(r.metrics.fnr),
            fmt_opt(r.metrics.fpr),
            r.metrics.pc,
            r.n
        )?;
    }
    Ok(())
}
