//! Station observation CSV: header `timestamp,ff,dd,t,rh`, ISO-8601 UTC
//! timestamps on the 10-min grid, empty field = missing.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::time::{format_utc, on_ten_min_grid, parse_utc, TimeAxis, TEN_MIN_SECS};
use crate::{Error, Result};

/// One 10-min observation slot. Channels are independently missing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObservationRecord {
    /// wind speed, m/s
    pub ff: Option<f64>,
    /// wind direction, degrees [0, 360)
    pub dd: Option<f64>,
    /// air temperature, degrees C
    pub t: Option<f64>,
    /// relative humidity, percent
    pub rh: Option<f64>,
}

impl ObservationRecord {
    pub fn is_empty(&self) -> bool {
        self.ff.is_none() && self.dd.is_none() && self.t.is_none() && self.rh.is_none()
    }
}

/// Regular 10-min time series for one station; absent input rows are
/// represented as all-missing records.
#[derive(Debug, Clone)]
pub struct ObservationSeries {
    pub axis: TimeAxis,
    pub records: Vec<ObservationRecord>,
}

impl ObservationSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn at_time(&self, t: DateTime<Utc>) -> Option<&ObservationRecord> {
        self.axis.index_of(t).map(|i| &self.records[i])
    }
}

fn parse_opt_f64(field: &str, path: &str, line: usize, name: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        path: path.into(),
        line,
        msg: format!("invalid {name} value {field:?}"),
    })
}

/// Loads and regularizes a station observation CSV onto the full 10-min grid
/// spanning its min..max timestamp.
pub fn load_observations(path: &Path) -> Result<ObservationSeries> {
    let file = std::fs::File::open(path)?;
    let pstr = path.display().to_string();
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity(format!("{pstr}: empty file")))??;
    if header.trim() != "timestamp,ff,dd,t,rh" {
        return Err(Error::Parse {
            path: pstr,
            line: 1,
            msg: format!("unexpected header {:?}", header.trim()),
        });
    }

    let mut rows: Vec<(DateTime<Utc>, ObservationRecord)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Parse {
                path: pstr,
                line: lineno,
                msg: format!("expected 5 fields, found {}", cols.len()),
            });
        }
        let ts = parse_utc(cols[0].trim()).map_err(|e| Error::Parse {
            path: pstr.clone(),
            line: lineno,
            msg: e.to_string(),
        })?;
        if !on_ten_min_grid(ts) {
            return Err(Error::Parse {
                path: pstr,
                line: lineno,
                msg: format!("timestamp {} not on the 10-min grid", cols[0].trim()),
            });
        }
        let rec = ObservationRecord {
            ff: parse_opt_f64(cols[1], &pstr, lineno, "ff")?,
            dd: parse_opt_f64(cols[2], &pstr, lineno, "dd")?,
            t: parse_opt_f64(cols[3], &pstr, lineno, "t")?,
            rh: parse_opt_f64(cols[4], &pstr, lineno, "rh")?,
        };
        if let Some(dd) = rec.dd {
            if !(0.0..360.0).contains(&dd) {
                return Err(Error::Value(format!(
                    "{pstr}:{lineno}: dd {dd} out of [0, 360)"
                )));
            }
        }
        if let Some(rh) = rec.rh {
            if !(0.0..=100.0).contains(&rh) {
                return Err(Error::Value(format!(
                    "{pstr}:{lineno}: rh {rh} out of [0, 100]"
                )));
            }
        }
        if let Some(ff) = rec.ff {
            if ff < 0.0 {
                return Err(Error::Value(format!("{pstr}:{lineno}: negative ff {ff}")));
            }
        }
        rows.push((ts, rec));
    }
    if rows.is_empty() {
        return Err(Error::Integrity(format!("{pstr}: no data rows")));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Integrity(format!(
                "{pstr}: duplicate timestamp {}",
                format_utc(w[0].0)
            )));
        }
    }

    let axis = TimeAxis::spanning(rows[0].0, rows[rows.len() - 1].0, TEN_MIN_SECS)?;
    let mut records = vec![ObservationRecord::default(); axis.len];
    for (ts, rec) in rows {
        let i = axis.index_of(ts).expect("row within spanning axis");
        records[i] = rec;
    }
    Ok(ObservationSeries { axis, records })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Writes a series back in the observation CSV contract; numeric fields
/// round-trip bit-exactly through `load_observations`.
pub fn write_observations<W: Write>(series: &ObservationSeries, mut w: W) -> Result<()> {
    writeln!(w, "timestamp,ff,dd,t,rh")?;
    for (i, rec) in series.records.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_utc(series.axis.at(i)),
            fmt_opt(rec.ff),
            fmt_opt(rec.dd),
            fmt_opt(rec.t),
            fmt_opt(rec.rh),
        )?;
    }
    Ok(())
}
