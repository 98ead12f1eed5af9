//! File formats and canonical time grids: station observation CSV, gridded
//! field sets (JSON manifest + flat binary arrays) and the pipeline config.

mod config;
mod gridded;
mod observations;

pub use config::*;
pub use gridded::*;
pub use observations::*;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationRole {
    Valley,
    Crest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoehnType {
    South,
    North,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationMeta {
    pub id: String,
    pub role: StationRole,
    pub lat: f64,
    pub lon: f64,
    pub altitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foehn_type: Option<FoehnType>,
}

impl StationMeta {
    pub fn validate(&self) -> crate::Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(crate::Error::Value(format!(
                "station {}: lat {} out of [-90, 90]",
                self.id, self.lat
            )));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(crate::Error::Value(format!(
                "station {}: lon {} out of [-180, 180]",
                self.id, self.lon
            )));
        }
        if !self.altitude.is_finite() {
            return Err(crate::Error::Value(format!(
                "station {}: non-finite altitude",
                self.id
            )));
        }
        Ok(())
    }
}
