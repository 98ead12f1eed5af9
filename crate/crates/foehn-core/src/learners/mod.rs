//! Binary probabilistic learners sharing one dataset and prediction
//! contract: L1-penalized logistic regression, lasso-based stability
//! selection, and gradient-boosted trees.

mod dataset;
mod gbt;
mod lasso;
mod logistic;
mod stabsel;

pub use dataset::*;
pub use gbt::*;
pub use lasso::*;
pub use logistic::*;
pub use stabsel::*;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lasso,
    Stabsel,
    Gbt,
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Lasso => "lasso",
            LearnerKind::Stabsel => "stabsel",
            LearnerKind::Gbt => "gbt",
        })
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(LearnerKind::Lasso),
            "stabsel" => Ok(LearnerKind::Stabsel),
            "gbt" | "xgboost" => Ok(LearnerKind::Gbt),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

/// One fitted learner behind the shared prediction contract. Serialized as
/// versioned JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerModel {
    Lasso(LassoModel),
    Stabsel(StabselModel),
    Gbt(GbtModel),
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelEnvelope {
    schema_version: u32,
    model: LearnerModel,
}

impl LearnerModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerModel::Lasso(_) => LearnerKind::Lasso,
            LearnerModel::Stabsel(_) => LearnerKind::Stabsel,
            LearnerModel::Gbt(_) => LearnerKind::Gbt,
        }
    }

    pub fn column_names(&self) -> &[String] {
        match self {
            LearnerModel::Lasso(m) => &m.schema.names,
            LearnerModel::Stabsel(m) => &m.schema.names,
            LearnerModel::Gbt(m) => &m.schema.names,
        }
    }

    /// Predicts probabilities for rows given as named original-scale columns.
    /// Column sets must match the training schema by name.
    pub fn predict(&self, names: &[String], columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let schema = match self {
            LearnerModel::Lasso(m) => &m.schema,
            LearnerModel::Stabsel(m) => &m.schema,
            LearnerModel::Gbt(m) => &m.schema,
        };
        let x = schema.standardize_input(names, columns)?;
        Ok(match self {
            LearnerModel::Lasso(m) => m.predict_standardized(&x),
            LearnerModel::Stabsel(m) => m.predict_standardized(&x),
            LearnerModel::Gbt(m) => m.predict_standardized(&x),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelEnvelope {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_str(json)?;
        if env.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model schema version {}",
                env.schema_version
            )));
        }
        Ok(env.model)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Class-stratified fold assignment: positives and negatives are shuffled
/// separately and dealt round-robin, so every fold holds both classes when
/// feasible.
pub fn stratified_folds(y: &[u8], k: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let mut neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut fold = vec![0usize; y.len()];
    for (j, &i) in pos.iter().chain(neg.iter()).enumerate() {
        fold[i] = j % k;
    }
    fold
}

/// Mean binomial log loss of probabilities against binary outcomes.
pub fn log_loss(p: &[f64], y: &[u8]) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(&pi, &yi)| {
            let pi = pi.clamp(1e-12, 1.0 - 1e-12);
            if yi == 1 {
                -pi.ln()
            } else {
                -(1.0 - pi).ln()
            }
        })
        .sum::<f64>()
        / n
}
