//! Covariate construction from gridded fields: star neighborhood geometry,
//! bilinear interpolation, day-of-year harmonics, and recipe-driven
//! assembly of the `direct` and `full` variable sets.

mod assemble;
mod interp;
mod recipes;
mod star;

pub use assemble::*;
pub use interp::*;
pub use recipes::*;
pub use star::*;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableSet {
    Direct,
    #[default]
    Full,
}

impl std::fmt::Display for VariableSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VariableSet::Direct => "direct",
            VariableSet::Full => "full",
        })
    }
}

impl std::str::FromStr for VariableSet {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "direct" => Ok(VariableSet::Direct),
            "full" => Ok(VariableSet::Full),
            other => Err(crate::Error::Config(format!("unknown variable set {other:?}"))),
        }
    }
}
