//! Temporal upscaling and aggregation: 10-min posteriors to hourly binary
//! labels (four-out-of-six rule), daily maxima, monthly/annual means with an
//! availability gate, and month x hour-of-day Hovmoeller matrices per decade.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::PosteriorSeries;
use crate::time::{owning_day, TimeAxis, HOUR_SECS, TEN_MIN_SECS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Foehn,
    NoFoehn,
}

/// Hourly ternary series; the label at time T summarizes the six 10-min
/// slots in (T-50min, T].
#[derive(Debug, Clone)]
pub struct HourlyLabelSeries {
    pub axis: TimeAxis,
    pub labels: Vec<Option<Label>>,
}

impl HourlyLabelSeries {
    /// Labels as probabilities {1, 0} with missing preserved.
    pub fn as_probabilities(&self) -> HourlyProbSeries {
        HourlyProbSeries {
            axis: self.axis.clone(),
            p: self
                .labels
                .iter()
                .map(|l| l.map(|l| if l == Label::Foehn { 1.0 } else { 0.0 }))
                .collect(),
        }
    }
}

/// Hourly probability series with possible missing slots. Reconstructions
/// are gap-free; observation-derived series are not.
#[derive(Debug, Clone)]
pub struct HourlyProbSeries {
    pub axis: TimeAxis,
    pub p: Vec<Option<f64>>,
}

/// Four-out-of-six hourly rule over the (up to six) 10-min slots of one hour:
/// missing when fewer than 4 probabilities are available, foehn when at least
/// half of the available ones are >= 0.5.
pub fn hourly_label(slots: &[Option<f64>]) -> Result<Option<Label>> {
    if slots.len() > 6 {
        return Err(Error::Contract(format!(
            "hourly window holds at most 6 slots, got {}",
            slots.len()
        )));
    }
    let available: Vec<f64> = slots.iter().flatten().copied().collect();
    if available.len() < 4 {
        return Ok(None);
    }
    let hits = available.iter().filter(|&&p| p >= 0.5).count();
    Ok(Some(if hits as f64 / available.len() as f64 >= 0.5 {
        Label::Foehn
    } else {
        Label::NoFoehn
    }))
}

/// Upscales a 10-min posterior series to hourly labels. Hour labels are
/// emitted for every full hour whose six-slot window lies inside the series.
pub fn upscale_hourly(series: &PosteriorSeries) -> Result<HourlyLabelSeries> {
    // earliest hour label whose full window (T-50min, T] lies inside the series
    let earliest = series.axis.start + Duration::seconds(5 * TEN_MIN_SECS);
    let first_label =
        earliest + Duration::seconds((-earliest.timestamp()).rem_euclid(HOUR_SECS));
    let last = series.axis.end();
    if last < first_label {
        return Err(Error::Value("series too short for any hourly label".into()));
    }
    let axis = TimeAxis::spanning(
        first_label,
        last - Duration::seconds(last.timestamp().rem_euclid(HOUR_SECS)),
        HOUR_SECS,
    )?;
    let mut labels = Vec::with_capacity(axis.len);
    for t in axis.iter() {
        let mut slots = [None; 6];
        for (k, slot) in slots.iter_mut().enumerate() {
            let st = t - Duration::seconds(TEN_MIN_SECS * (5 - k) as i64);
            *slot = series.axis.index_of(st).and_then(|i| series.p[i]);
        }
        labels.push(hourly_label(&slots)?);
    }
    Ok(HourlyLabelSeries { axis, labels })
}

/// Daily aggregate on consecutive calendar days.
#[derive(Debug, Clone)]
pub struct DailySeries {
    pub start: NaiveDate,
    pub values: Vec<Option<f64>>,
    /// fraction of the 24 contributing hours present
    pub availability: Vec<f64>,
}

impl DailySeries {
    pub fn date(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Maximum hourly probability per calendar day; a day owns the hour labels
/// (d 00:00, d+1 00:00].
pub fn daily_max(hourly: &HourlyProbSeries) -> DailySeries {
    let mut by_day: BTreeMap<NaiveDate, (Vec<f64>, usize)> = BTreeMap::new();
    for (i, t) in hourly.axis.iter().enumerate() {
        let day = owning_day(t);
        let entry = by_day.entry(day).or_default();
        entry.1 += 1;
        if let Some(p) = hourly.p[i] {
            entry.0.push(p);
        }
    }
    let start = *by_day.keys().next().expect("nonempty series");
    let end = *by_day.keys().last().unwrap();
    let n_days = (end - start).num_days() as usize + 1;
    let mut values = vec![None; n_days];
    let mut availability = vec![0.0; n_days];
    for (day, (present, _total)) in by_day {
        let i = (day - start).num_days() as usize;
        availability[i] = present.len() as f64 / 24.0;
        values[i] = present.iter().copied().reduce(f64::max);
    }
    DailySeries {
        start,
        values,
        availability,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Month,
    Year,
}

/// Period aggregate: one value per month or year.
#[derive(Debug, Clone)]
pub struct PeriodSeries {
    pub period: Period,
    /// first day of each period, consecutive
    pub starts: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
    pub availability: Vec<f64>,
}

fn period_key(date: NaiveDate, period: Period) -> NaiveDate {
    match period {
        Period::Month => NaiveDate::from_ymd_opt(date.year(), date.month(), 1).unwrap(),
        Period::Year => NaiveDate::from_ymd_opt(date.year(), 1, 1).unwrap(),
    }
}

fn next_period(date: NaiveDate, period: Period) -> NaiveDate {
    match period {
        Period::Month => {
            let (y, m) = if date.month() == 12 {
                (date.year() + 1, 1)
            } else {
                (date.year(), date.month() + 1)
            };
            NaiveDate::from_ymd_opt(y, m, 1).unwrap()
        }
        Period::Year => NaiveDate::from_ymd_opt(date.year() + 1, 1, 1).unwrap(),
    }
}

/// Mean of the available daily values per period; missing when the period's
/// measurement availability (mean daily availability, absent days counting
/// zero) falls below `min_availability`.
pub fn periodic_mean(daily: &DailySeries, period: Period, min_availability: f64) -> PeriodSeries {
    let mut sums: BTreeMap<NaiveDate, (f64, usize, f64)> = BTreeMap::new();
    for i in 0..daily.len() {
        let key = period_key(daily.date(i), period);
        let entry = sums.entry(key).or_default();
        if let Some(v) = daily.values[i] {
            entry.0 += v;
            entry.1 += 1;
            entry.2 += daily.availability[i];
        }
    }
    let mut starts = Vec::new();
    let mut values = Vec::new();
    let mut availability = Vec::new();
    for (key, (sum, n_avail, avail_sum)) in sums {
        let days_in_period = (next_period(key, period) - key).num_days() as usize;
        let avail = avail_sum / days_in_period as f64;
        starts.push(key);
        availability.push(avail);
        values.push(if avail >= min_availability && n_avail > 0 {
            Some(sum / n_avail as f64)
        } else {
            None
        });
    }
    PeriodSeries {
        period,
        starts,
        values,
        availability,
    }
}

/// 12 x 24 matrix of mean probabilities per (month, hour-of-day) cell.
pub type HovmollerMatrix = [[f64; 24]; 12];

/// Decadal Hovmoeller aggregation; decade 1940 covers years 1940-1949.
pub fn hovmoller(hourly: &HourlyProbSeries) -> BTreeMap<i32, HovmollerMatrix> {
    let mut sums: BTreeMap<i32, ([[f64; 24]; 12], [[usize; 24]; 12])> = BTreeMap::new();
    for (i, t) in hourly.axis.iter().enumerate() {
        if let Some(p) = hourly.p[i] {
            let decade = t.year().div_euclid(10) * 10;
            let entry = sums.entry(decade).or_insert(([[0.0; 24]; 12], [[0; 24]; 12]));
            let m = t.month0() as usize;
            let h = t.hour() as usize;
            entry.0[m][h] += p;
            entry.1[m][h] += 1;
        }
    }
    sums.into_iter()
        .map(|(decade, (sum, count))| {
            let mut out = [[f64::NAN; 24]; 12];
            for m in 0..12 {
                for h in 0..24 {
                    if count[m][h] > 0 {
                        out[m][h] = sum[m][h] / count[m][h] as f64;
                    }
                }
            }
            (decade, out)
        })
        .collect()
}

/// Aggregate export: `period_start,value,availability`.
pub fn write_period_series<W: Write>(series: &PeriodSeries, mut w: W) -> Result<()> {
    writeln!(w, "period_start,value,availability")?;
    for i in 0..series.starts.len() {
        writeln!(
            w,
            "{},{},{}",
            series.starts[i],
            series.values[i].map(|v| format!("{v}")).unwrap_or_default(),
            series.availability[i],
        )?;
    }
    Ok(())
}

pub fn write_daily_series<W: Write>(series: &DailySeries, mut w: W) -> Result<()> {
    writeln!(w, "period_start,value,availability")?;
    for i in 0..series.len() {
        writeln!(
            w,
            "{},{},{}",
            series.date(i),
            series.values[i].map(|v| format!("{v}")).unwrap_or_default(),
            series.availability[i],
        )?;
    }
    Ok(())
}

/// Hovmoeller export: 12 rows (months) x 24 columns (hours) with a header line.
pub fn write_hovmoller<W: Write>(matrix: &HovmollerMatrix, mut w: W) -> Result<()> {
    let header: Vec<String> = (0..24).map(|h| format!("h{h:02}")).collect();
    writeln!(w, "month,{}", header.join(","))?;
    for (m, row) in matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", m + 1, cells.join(","))?;
    }
    Ok(())
}

/// Exports hourly labels as `timestamp,label` with empty label for missing.
pub fn write_hourly_labels<W: Write>(series: &HourlyLabelSeries, mut w: W) -> Result<()> {
    writeln!(w, "timestamp,label")?;
    for (i, t) in series.axis.iter().enumerate() {
        let label = match series.labels[i] {
            Some(Label::Foehn) => "foehn",
            Some(Label::NoFoehn) => "no_foehn",
            None => "",
        };
        writeln!(w, "{},{}", crate::time::format_utc(t), label)?;
    }
    Ok(())
}

/// Parses the hourly label CSV written by `write_hourly_labels`.
pub fn read_hourly_labels<R: std::io::BufRead>(r: R) -> Result<HourlyLabelSeries> {
    let mut times: Vec<DateTime<Utc>> = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "timestamp,label" {
                return Err(Error::Schema(format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (ts, label) = line
            .split_once(',')
            .ok_or_else(|| Error::Schema(format!("bad label row {line:?}")))?;
        times.push(crate::time::parse_utc(ts)?);
        labels.push(match label.trim() {
            "foehn" => Some(Label::Foehn),
            "no_foehn" => Some(Label::NoFoehn),
            "" => None,
            other => return Err(Error::Schema(format!("unknown label {other:?}"))),
        });
    }
    if times.is_empty() {
        return Err(Error::Integrity("empty label file".into()));
    }
    let axis = TimeAxis::spanning(times[0], *times.last().unwrap(), HOUR_SECS)?;
    if axis.len != times.len() {
        return Err(Error::Integrity("label series not on uniform hourly grid".into()));
    }
    Ok(HourlyLabelSeries { axis, labels })
}
