//! Deterministic synthetic data: a two-state hourly Markov chain drives
//! paired valley/crest 10-min observations and gridded fields carrying a
//! cross-ridge pressure signal, with the latent states kept as ground truth.

use chrono::Timelike;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregate::{HourlyLabelSeries, Label};
use crate::data_io::{
    FoehnType, GridSpec, GriddedFieldSet, ObservationRecord, ObservationSeries, StationMeta,
    StationRole,
};
use crate::learners::logit;
use crate::time::{fractional_day_of_year, TimeAxis, HOUR_SECS, TEN_MIN_SECS};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub start_year: i32,
    pub end_year: i32,
    /// hourly transition probability no-foehn -> foehn
    pub p_onset: f64,
    /// hourly persistence probability foehn -> foehn
    pub p_stay: f64,
    /// potential temperature difference components (deg C)
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    /// (mean, sd) conditional emission parameters
    pub rh_foehn: (f64, f64),
    pub rh_no: (f64, f64),
    pub ff_foehn: (f64, f64),
    pub ff_no: (f64, f64),
    pub valley_sector: (f64, f64),
    pub crest_sector: (f64, f64),
    /// crest minus valley altitude, meters
    pub dh: f64,
    /// per-slot probability of a fully missing record
    pub missing_rate: f64,
    /// cross-ridge pressure gradient per unit latent signal, hPa/degree
    pub signal_strength: f64,
    /// common-mode pressure noise shared by the whole grid, hPa
    pub noise_sd: f64,
    /// independent per-cell noise, hPa
    pub micro_sd: f64,
    /// diurnal/seasonal modulation of the onset probability, logit scale
    pub diurnal_amp: f64,
    pub seasonal_amp: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            start_year: 2011,
            end_year: 2022,
            p_onset: 0.04,
            p_stay: 0.8,
            mu1: -8.0,
            sigma1: 2.0,
            mu2: 0.0,
            sigma2: 1.0,
            rh_foehn: (30.0, 8.0),
            rh_no: (70.0, 12.0),
            ff_foehn: (8.0, 2.0),
            ff_no: (3.0, 1.5),
            valley_sector: (60.0, 240.0),
            crest_sector: (105.0, 285.0),
            dh: 1500.0,
            missing_rate: 0.02,
            signal_strength: 6.0,
            noise_sd: 5.0,
            micro_sd: 1.0,
            diurnal_amp: 0.5,
            seasonal_amp: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.end_year < self.start_year {
            return Err(Error::Config("synth span ends before it starts".into()));
        }
        for (name, p) in [("p_onset", self.p_onset), ("p_stay", self.p_stay)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(Error::Config("missing_rate outside [0, 1]".into()));
        }
        Ok(())
    }
}

pub struct SynthData {
    pub valley: ObservationSeries,
    pub crest: ObservationSeries,
    pub gridded: GriddedFieldSet,
    pub truth: HourlyLabelSeries,
    pub valley_meta: StationMeta,
    pub crest_meta: StationMeta,
    pub ridge: Vec<(f64, f64)>,
}

const VALLEY_LAT: f64 = 47.5;
const VALLEY_LON: f64 = 11.0;
const RIDGE_LAT: f64 = 47.0;

fn uniform_in_sector(sector: (f64, f64), rng: &mut impl Rng) -> f64 {
    let width = (sector.1 - sector.0).rem_euclid(360.0);
    (sector.0 + rng.gen::<f64>() * width).rem_euclid(360.0)
}

fn draw(mean_sd: (f64, f64), rng: &mut impl Rng) -> f64 {
    Normal::new(mean_sd.0, mean_sd.1).unwrap().sample(rng)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let chain_start = chrono::Utc
        .with_ymd_and_hms(spec.start_year, 1, 1, 0, 0, 0)
        .unwrap();
    let chain_end = chrono::Utc
        .with_ymd_and_hms(spec.end_year + 1, 1, 1, 0, 0, 0)
        .unwrap();
    let chain_axis = TimeAxis::spanning(chain_start, chain_end, HOUR_SECS)?;

    // hourly latent chain with diurnal/seasonal onset modulation
    let mut rng_chain = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5161_7468);
    let mut states = Vec::with_capacity(chain_axis.len);
    let mut state = false;
    for t in chain_axis.iter() {
        let doy = fractional_day_of_year(t);
        let onset_logit = logit(spec.p_onset)
            + spec.diurnal_amp
                * (2.0 * std::f64::consts::PI * (t.hour() as f64 - 15.0) / 24.0).cos()
            + spec.seasonal_amp * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos();
        let p_up = if state {
            spec.p_stay
        } else {
            1.0 / (1.0 + (-onset_logit).exp())
        };
        state = rng_chain.gen::<f64>() < p_up;
        states.push(state);
    }

    // hourly truth labels, skipping the chain's leading 00:00 instant so the
    // axis matches the hours the 10-min observations can label
    let truth_axis = TimeAxis::new(chain_axis.at(1), HOUR_SECS, chain_axis.len - 1);
    let truth = HourlyLabelSeries {
        axis: truth_axis.clone(),
        labels: states[1..]
            .iter()
            .map(|&s| Some(if s { Label::Foehn } else { Label::NoFoehn }))
            .collect(),
    };

    // 10-min emissions; all six slots of an hour share its latent state
    let obs_axis = TimeAxis::new(
        chain_start + chrono::Duration::seconds(TEN_MIN_SECS),
        TEN_MIN_SECS,
        (chain_axis.len - 1) * 6,
    );
    let mut rng_obs = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6f62_7300);
    let mut valley_records = Vec::with_capacity(obs_axis.len);
    let mut crest_records = Vec::with_capacity(obs_axis.len);
    for t in obs_axis.iter() {
        let owning = t.timestamp() + (-t.timestamp()).rem_euclid(HOUR_SECS);
        let hour_idx = ((owning - chain_start.timestamp()) / HOUR_SECS) as usize;
        let foehn = states[hour_idx];
        let doy = fractional_day_of_year(t);
        let t_crest = 10.0 * (2.0 * std::f64::consts::PI * (doy - 110.0) / 365.25).sin()
            + draw((0.0, 0.5), &mut rng_obs);
        let delta = if foehn {
            draw((spec.mu2, spec.sigma2), &mut rng_obs)
        } else {
            draw((spec.mu1, spec.sigma1), &mut rng_obs)
        };
        let valley = ObservationRecord {
            ff: Some(
                draw(if foehn { spec.ff_foehn } else { spec.ff_no }, &mut rng_obs).max(0.0),
            ),
            dd: Some(if foehn {
                uniform_in_sector(spec.valley_sector, &mut rng_obs)
            } else {
                rng_obs.gen::<f64>() * 360.0
            }),
            t: Some(t_crest + 0.01 * spec.dh + delta),
            rh: Some(
                draw(if foehn { spec.rh_foehn } else { spec.rh_no }, &mut rng_obs)
                    .clamp(0.0, 100.0),
            ),
        };
        let crest = ObservationRecord {
            ff: Some(draw((10.0, 3.0), &mut rng_obs).max(0.0)),
            dd: Some(if foehn {
                uniform_in_sector(spec.crest_sector, &mut rng_obs)
            } else {
                rng_obs.gen::<f64>() * 360.0
            }),
            t: Some(t_crest),
            rh: Some(draw((60.0, 15.0), &mut rng_obs).clamp(0.0, 100.0)),
        };
        let miss_v = rng_obs.gen::<f64>() < spec.missing_rate;
        let miss_c = rng_obs.gen::<f64>() < spec.missing_rate;
        valley_records.push(if miss_v { ObservationRecord::default() } else { valley });
        crest_records.push(if miss_c { ObservationRecord::default() } else { crest });
    }

    // gridded fields over the span's standard hourly axis
    let grid = GridSpec {
        lat0: 44.0,
        lon0: 8.0,
        dlat: 1.0,
        dlon: 1.0,
        nlat: 7,
        nlon: 7,
    };
    // a margin beyond the span keeps temporally lagged features defined at
    // the span edges; the latent state is clamped into the margin
    const GRID_MARGIN_HOURS: usize = 6;
    let span_axis = crate::time::hourly_span(spec.start_year, spec.end_year);
    let grid_axis = TimeAxis::new(
        span_axis.at(0) - chrono::Duration::hours(GRID_MARGIN_HOURS as i64),
        HOUR_SECS,
        span_axis.len + 2 * GRID_MARGIN_HOURS,
    );
    let mut gridded = GriddedFieldSet::new(grid, grid_axis.clone());
    let mut rng_grid = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6772_6964);
    let cells = grid.nlat * grid.nlon;
    for (field, base) in [("pressure_850", 1500.0), ("pressure_900", 1000.0)] {
        let mut values = Vec::with_capacity(grid_axis.len * cells);
        for ti in 0..grid_axis.len {
            let si = (ti as i64 - GRID_MARGIN_HOURS as i64).clamp(0, states.len() as i64 - 1)
                as usize;
            let sval = (states[si] as u8 as f64) + draw((0.0, 0.1), &mut rng_grid);
            let common = draw((0.0, spec.noise_sd), &mut rng_grid);
            for i in 0..grid.nlat {
                let lat = grid.lat(i);
                for _j in 0..grid.nlon {
                    let micro = draw((0.0, spec.micro_sd), &mut rng_grid);
                    values.push(
                        base - spec.signal_strength * sval * (lat - RIDGE_LAT) + common + micro,
                    );
                }
            }
        }
        gridded.insert_field(field, values)?;
    }

    let valley_meta = StationMeta {
        id: "valley".into(),
        role: StationRole::Valley,
        lat: VALLEY_LAT,
        lon: VALLEY_LON,
        altitude: 600.0,
        foehn_type: Some(FoehnType::South),
    };
    let crest_meta = StationMeta {
        id: "crest".into(),
        role: StationRole::Crest,
        lat: RIDGE_LAT,
        lon: VALLEY_LON,
        altitude: 600.0 + spec.dh,
        foehn_type: None,
    };
    Ok(SynthData {
        valley: ObservationSeries {
            axis: obs_axis.clone(),
            records: valley_records,
        },
        crest: ObservationSeries {
            axis: obs_axis,
            records: crest_records,
        },
        gridded,
        truth,
        valley_meta,
        crest_meta,
        ridge: vec![(RIDGE_LAT, 9.0), (RIDGE_LAT, 13.0)],
    })
}

use chrono::TimeZone;

pub fn load_spec(path: &std::path::Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: SynthSpec = serde_json::from_str(&text)?;
    spec.validate()?;
    Ok(spec)
}
