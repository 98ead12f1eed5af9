//! Probabilistic foehn wind classification and long-term reconstruction.
//!
//! The pipeline turns paired valley/crest station observations into 10-min
//! posterior foehn probabilities via a two-component Gaussian mixture model
//! with concomitants, upscales them to hourly binary labels, links the labels
//! to gridded reanalysis-style covariates with three binary probabilistic
//! learners, reconstructs hourly foehn probabilities over multi-decade
//! periods, and analyzes the result with a season-trend decomposition.

pub mod aggregate;
pub mod classify;
pub mod data_io;
pub mod decompose;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod learners;
pub mod reconstruct;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
