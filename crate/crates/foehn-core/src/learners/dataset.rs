//! Shared design matrix: standardized columns with the training schema kept
//! for prediction-time reuse.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Column schema frozen at training time: names plus standardization stats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl ColumnSchema {
    /// Reorders and standardizes prediction-time columns to match training.
    pub fn standardize_input(&self, names: &[String], columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if names.len() != columns.len() {
            return Err(Error::Contract("names/columns length mismatch".into()));
        }
        let mut out = Vec::with_capacity(self.names.len());
        for (j, want) in self.names.iter().enumerate() {
            let src = names
                .iter()
                .position(|n| n == want)
                .ok_or_else(|| Error::Schema(format!("missing input column {want:?}")))?;
            out.push(
                columns[src]
                    .iter()
                    .map(|v| (v - self.means[j]) / self.sds[j])
                    .collect(),
            );
        }
        Ok(out)
    }
}

/// Standardized covariate matrix with binary labels. Zero-variance columns
/// are dropped and recorded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: ColumnSchema,
    /// column-major standardized values
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub dropped: Vec<String>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Contract("names/columns length mismatch".into()));
        }
        let n = y.len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Contract(format!(
                    "column {name:?} has {} rows, labels have {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Value(format!("column {name:?} holds non-finite values")));
            }
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Value("labels must be 0/1".into()));
        }

        let mut kept_names = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        let mut x = Vec::new();
        let mut dropped = Vec::new();
        for (name, col) in names.into_iter().zip(columns) {
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd == 0.0 {
                dropped.push(name);
                continue;
            }
            x.push(col.iter().map(|v| (v - mean) / sd).collect());
            kept_names.push(name);
            means.push(mean);
            sds.push(sd);
        }
        Ok(Dataset {
            schema: ColumnSchema {
                names: kept_names,
                means,
                sds,
            },
            x,
            y,
            dropped,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.x.len()
    }

    pub fn both_classes_present(&self) -> bool {
        self.y.iter().any(|&v| v == 1) && self.y.iter().any(|&v| v == 0)
    }

    pub fn positive_rate(&self) -> f64 {
        self.y.iter().map(|&v| v as f64).sum::<f64>() / self.n_rows() as f64
    }

    /// Row-subset view (copies), keeping the parent standardization.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            x: self
                .x
                .iter()
                .map(|col| rows.iter().map(|&i| col[i]).collect())
                .collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            dropped: self.dropped.clone(),
        }
    }
}
