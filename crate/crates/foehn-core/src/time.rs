//! UTC time grids. Everything internal is UTC; local time never appears.

use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc};

use crate::{Error, Result};

pub const TEN_MIN_SECS: i64 = 600;
pub const HOUR_SECS: i64 = 3600;

/// Parses an ISO-8601 UTC timestamp like `2006-01-01T00:10:00Z`.
pub fn parse_utc(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc))
        .map_err(|e| Error::Value(format!("invalid timestamp {s:?}: {e}")))
}

pub fn format_utc(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// True iff `t` sits on the 10-min observation grid (minute in {0,10,..,50}, second 0).
pub fn on_ten_min_grid(t: DateTime<Utc>) -> bool {
    t.timestamp() % TEN_MIN_SECS == 0
}

pub fn on_hour_grid(t: DateTime<Utc>) -> bool {
    t.timestamp() % HOUR_SECS == 0
}

/// A uniform UTC time axis: `start + i * step_secs` for `i in 0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeAxis {
    pub start: DateTime<Utc>,
    pub step_secs: i64,
    pub len: usize,
}

impl TimeAxis {
    pub fn new(start: DateTime<Utc>, step_secs: i64, len: usize) -> Self {
        assert!(step_secs > 0);
        TimeAxis {
            start,
            step_secs,
            len,
        }
    }

    /// Axis spanning `start..=end` inclusive at the given step.
    pub fn spanning(start: DateTime<Utc>, end: DateTime<Utc>, step_secs: i64) -> Result<Self> {
        let span = end.timestamp() - start.timestamp();
        if span < 0 {
            return Err(Error::Value("time axis end before start".into()));
        }
        if span % step_secs != 0 {
            return Err(Error::Value(
                "time axis endpoints not aligned to step".into(),
            ));
        }
        Ok(TimeAxis::new(start, step_secs, (span / step_secs) as usize + 1))
    }

    pub fn at(&self, i: usize) -> DateTime<Utc> {
        self.start + Duration::seconds(self.step_secs * i as i64)
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.at(self.len.saturating_sub(1))
    }

    /// Index of `t` on the axis, if it lies exactly on it.
    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let off = t.timestamp() - self.start.timestamp();
        if off < 0 || off % self.step_secs != 0 {
            return None;
        }
        let i = (off / self.step_secs) as usize;
        (i < self.len).then_some(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = DateTime<Utc>> + '_ {
        (0..self.len).map(move |i| self.at(i))
    }

    /// Intersection of two axes with identical steps; `None` when disjoint.
    pub fn intersect(&self, other: &TimeAxis) -> Option<TimeAxis> {
        if self.step_secs != other.step_secs {
            return None;
        }
        if (other.start.timestamp() - self.start.timestamp()) % self.step_secs != 0 {
            return None;
        }
        let start = self.start.max(other.start);
        let end = self.end().min(other.end());
        if end < start {
            return None;
        }
        Some(TimeAxis::spanning(start, end, self.step_secs).expect("aligned"))
    }
}

/// Hourly instants of the span `[start_year-01-01T00, end_year-12-31T23]`.
pub fn hourly_span(start_year: i32, end_year: i32) -> TimeAxis {
    let start = Utc.with_ymd_and_hms(start_year, 1, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(end_year, 12, 31, 23, 0, 0).unwrap();
    TimeAxis::spanning(start, end, HOUR_SECS).expect("aligned span")
}

/// Fractional day-of-year starting at 0 (Jan 1 00:00 UTC = 0.0).
pub fn fractional_day_of_year(t: DateTime<Utc>) -> f64 {
    let doy0 = (t.ordinal() - 1) as f64;
    let frac = (t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0) / 24.0;
    doy0 + frac
}

/// Calendar day owning the hour label `t`: hours 01:00..=24:00 belong to the
/// day they close, i.e. the 00:00 label belongs to the previous day.
pub fn owning_day(t: DateTime<Utc>) -> chrono::NaiveDate {
    (t - Duration::seconds(1)).date_naive()
}
