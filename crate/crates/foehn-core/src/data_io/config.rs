//! Pipeline configuration: a single JSON document with defaults applied for
//! omitted tuning blocks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{EmOptions, WindSector};
use crate::data_io::{StationMeta, StationRole};
use crate::features::VariableSet;
use crate::learners::{GbtOptions, LassoOptions, StabselOptions};
use crate::{Error, Result};

/// Seed used when the config omits one.
pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationConfig {
    #[serde(flatten)]
    pub meta: StationMeta,
    /// id of the paired crest station; required for valley stations
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley_sector: Option<WindSector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crest_sector: Option<WindSector>,
    /// observation CSV path, relative to the data directory
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvConfig {
    pub start_year: i32,
    pub end_year: i32,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            start_year: 2011,
            end_year: 2022,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfigs {
    pub lasso: LassoOptions,
    pub stabsel: StabselOptions,
    pub gbt: GbtOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub stations: Vec<StationConfig>,
    /// main mountain ridge as a lat/lon polyline
    pub ridge: Vec<(f64, f64)>,
    /// gridded field directory, relative to the config file
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridded: Option<String>,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub variable_set: VariableSet,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub classify: EmOptions,
    #[serde(default)]
    pub learners: LearnerConfigs,
}

impl PipelineConfig {
    pub fn station(&self, id: &str) -> Option<&StationConfig> {
        self.stations.iter().find(|s| s.meta.id == id)
    }

    pub fn valley_stations(&self) -> impl Iterator<Item = &StationConfig> {
        self.stations
            .iter()
            .filter(|s| s.meta.role == StationRole::Valley)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.stations {
            s.meta.validate()?;
            if s.meta.role == StationRole::Valley {
                let crest_id = s.crest.as_deref().ok_or_else(|| {
                    Error::Config(format!("valley station {} has no crest pairing", s.meta.id))
                })?;
                let crest = self.station(crest_id).ok_or_else(|| {
                    Error::Config(format!(
                        "valley station {} references unknown crest {crest_id:?}",
                        s.meta.id
                    ))
                })?;
                if crest.meta.role != StationRole::Crest {
                    return Err(Error::Config(format!(
                        "station {crest_id} referenced as crest but has role valley"
                    )));
                }
                if s.valley_sector.is_none() || s.crest_sector.is_none() {
                    return Err(Error::Config(format!(
                        "valley station {} is missing a wind sector definition",
                        s.meta.id
                    )));
                }
            }
        }
        if self.ridge.len() < 2 {
            return Err(Error::Config("ridge polyline needs at least 2 vertices".into()));
        }
        if self.cv.end_year < self.cv.start_year {
            return Err(Error::Config("cv end_year before start_year".into()));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let config: PipelineConfig = serde_json::from_reader(std::fs::File::open(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
