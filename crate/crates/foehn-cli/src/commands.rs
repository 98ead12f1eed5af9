//! Subcommand implementations. Every command reads and writes inside a
//! single workspace directory (`--out`), with a fixed per-artifact layout so
//! the stages chain without extra flags.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use chrono::Datelike;
use foehn_core::aggregate::{
    daily_max, hovmoller, periodic_mean, read_hourly_labels, upscale_hourly, write_daily_series,
    write_hourly_labels, write_hovmoller, write_period_series, HourlyLabelSeries, Period,
};
use foehn_core::classify::{
    classify_series, read_posteriors, write_posteriors, ClassifySetup, MixtureParams, WindSector,
};
use foehn_core::data_io::{
    load_config, load_gridded, load_observations, write_gridded, write_observations, CvConfig,
    PipelineConfig, StationConfig,
};
use foehn_core::decompose::{
    decade_seasonal, fit_str, trend_significance, write_decade_seasonal, write_str_fit, StrOptions,
};
use foehn_core::evaluate::{make_folds, run_cv, train_full_period, write_score_report};
use foehn_core::features::{
    assemble, build_star, default_recipes, load_feature_table, write_feature_table, VariableSet,
};
use foehn_core::learners::{LearnerKind, LearnerModel};
use foehn_core::reconstruct::{
    reconstruct, reconstruction_report, write_reconstruction, write_year_summaries, Reconstruction,
};
use foehn_core::synth::{generate, load_spec, SynthSpec};
use foehn_core::time::{parse_utc, TimeAxis, HOUR_SECS};
use foehn_core::{Error, Result};

use crate::util::{info, write_artifact, write_atomic, write_dir_atomic};

/// Artifact layout inside the workspace directory.
pub struct Workspace(pub PathBuf);

impl Workspace {
    pub fn config(&self) -> PathBuf {
        self.0.join("config.json")
    }
    pub fn posteriors(&self, id: &str) -> PathBuf {
        self.0.join("classify").join(format!("{id}.csv"))
    }
    pub fn mixture(&self, id: &str) -> PathBuf {
        self.0.join("classify").join(format!("{id}_params.json"))
    }
    pub fn labels(&self, id: &str) -> PathBuf {
        self.0.join("labels").join(format!("{id}.csv"))
    }
    pub fn aggregate(&self, id: &str, kind: &str) -> PathBuf {
        self.0.join("aggregate").join(format!("{id}_{kind}.csv"))
    }
    pub fn features_stem(&self, id: &str, set: VariableSet) -> PathBuf {
        self.0.join("features").join(format!("{id}_{set}"))
    }
    pub fn models(&self, id: &str, learner: LearnerKind, set: VariableSet) -> PathBuf {
        self.0.join("models").join(format!("{id}_{learner}_{set}.json"))
    }
    pub fn cv(&self, id: &str, set: VariableSet) -> PathBuf {
        self.0.join("cv").join(format!("{id}_{set}.csv"))
    }
    pub fn recon(&self, id: &str, learner: LearnerKind, set: VariableSet) -> PathBuf {
        self.0.join("recon").join(format!("{id}_{learner}_{set}.csv"))
    }
    pub fn recon_years(&self, id: &str, learner: LearnerKind, set: VariableSet) -> PathBuf {
        self.0.join("recon").join(format!("{id}_{learner}_{set}_years.csv"))
    }
    pub fn str_fit(&self, id: &str, learner: LearnerKind, set: VariableSet) -> PathBuf {
        self.0.join("decompose").join(format!("{id}_{learner}_{set}_str.csv"))
    }
    pub fn decades(&self, id: &str, learner: LearnerKind, set: VariableSet) -> PathBuf {
        self.0.join("decompose").join(format!("{id}_{learner}_{set}_decades.csv"))
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.0.join("report").join(name)
    }
}

/// A loaded pipeline config plus the directory its relative paths resolve
/// against.
pub struct Loaded {
    pub config: PipelineConfig,
    base: PathBuf,
}

pub fn load(config_path: &Path) -> Result<Loaded> {
    let config = load_config(config_path)?;
    let base = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok(Loaded { config, base })
}

impl Loaded {
    fn resolve(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    /// Valley stations to process, optionally narrowed to one id.
    pub fn valleys(&self, only: Option<&str>) -> Result<Vec<&StationConfig>> {
        let picked: Vec<&StationConfig> = self
            .config
            .valley_stations()
            .filter(|s| only.is_none_or(|id| s.meta.id == id))
            .collect();
        if picked.is_empty() {
            return Err(Error::Config(match only {
                Some(id) => format!("no valley station {id:?} in the config"),
                None => "config has no valley stations".into(),
            }));
        }
        Ok(picked)
    }

    fn observations_for(&self, st: &StationConfig) -> Result<foehn_core::data_io::ObservationSeries> {
        let rel = st.observations.as_deref().ok_or_else(|| {
            Error::Config(format!("station {} has no observations path", st.meta.id))
        })?;
        load_observations(&self.resolve(rel))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?)
    .map_err(Into::into)
}

fn open_buffered(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path).map_err(
        |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
    )?))
}

pub fn synth(
    out: &Path,
    spec_path: Option<&Path>,
    seed: Option<u64>,
    years: Option<i32>,
) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => load_spec(p)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(years) = years {
        if years < 1 {
            return Err(Error::Config("--years must be at least 1".into()));
        }
        spec.end_year = spec.start_year + years - 1;
    }
    info!(
        "generating synthetic data, seed {} span {}-{}",
        spec.seed, spec.start_year, spec.end_year
    );
    let data = generate(&spec)?;
    let ws = Workspace(out.to_path_buf());

    write_artifact(&out.join("valley.csv"), |w| write_observations(&data.valley, w))?;
    write_artifact(&out.join("crest.csv"), |w| write_observations(&data.crest, w))?;
    write_artifact(&out.join("truth.csv"), |w| write_hourly_labels(&data.truth, w))?;
    write_dir_atomic(&out.join("gridded"), |d| write_gridded(&data.gridded, d))?;

    let config = PipelineConfig {
        stations: vec![
            StationConfig {
                meta: data.valley_meta.clone(),
                crest: Some(data.crest_meta.id.clone()),
                valley_sector: Some(WindSector::from(spec.valley_sector)),
                crest_sector: Some(WindSector::from(spec.crest_sector)),
                observations: Some("valley.csv".into()),
            },
            StationConfig {
                meta: data.crest_meta.clone(),
                crest: None,
                valley_sector: None,
                crest_sector: None,
                observations: Some("crest.csv".into()),
            },
        ],
        ridge: data.ridge.clone(),
        gridded: Some("gridded".into()),
        cv: CvConfig {
            start_year: spec.start_year,
            end_year: spec.end_year,
        },
        variable_set: VariableSet::default(),
        seed: spec.seed,
        classify: Default::default(),
        // synthetic designs carry exactly dependent recipe columns, so trade
        // path resolution for runtime relative to the library defaults
        learners: foehn_core::data_io::LearnerConfigs {
            lasso: foehn_core::learners::LassoOptions {
                n_lambda: 40,
                lambda_min_ratio: 1e-3,
                cv_folds: 8,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    write_atomic(&ws.config(), &serde_json::to_vec_pretty(&config)?)?;
    info!("wrote {}", ws.config().display());
    Ok(())
}

pub fn classify(loaded: &Loaded, out: &Path, station: Option<&str>) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let crest_id = st.crest.as_deref().expect("validated valley pairing");
        let crest = loaded.config.station(crest_id).expect("validated crest");
        let valley_obs = loaded.observations_for(st)?;
        let crest_obs = loaded.observations_for(crest)?;
        let setup = ClassifySetup {
            valley_sector: st.valley_sector.expect("validated sector"),
            crest_sector: st.crest_sector.expect("validated sector"),
            dh: crest.meta.altitude - st.meta.altitude,
        };
        info!("classifying {id} against crest {crest_id}");
        let series = classify_series(&valley_obs, &crest_obs, &setup, &loaded.config.classify)?;
        info!(
            "{id}: mixture mu1={:.3} mu2={:.3} on {} slots",
            series.params.mu1, series.params.mu2, series.params.n_used
        );
        write_artifact(&ws.posteriors(id), |w| write_posteriors(&series, w))?;
        write_atomic(&ws.mixture(id), &serde_json::to_vec_pretty(&series.params)?)?;
    }
    Ok(())
}

pub fn aggregate(loaded: &Loaded, out: &Path, station: Option<&str>) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let params: MixtureParams = read_json(&ws.mixture(id))?;
        let series = read_posteriors(open_buffered(&ws.posteriors(id))?, params)?;
        let labels = upscale_hourly(&series)?;
        write_artifact(&ws.labels(id), |w| write_hourly_labels(&labels, w))?;

        let probs = labels.as_probabilities();
        let daily = daily_max(&probs);
        write_artifact(&ws.aggregate(id, "daily"), |w| write_daily_series(&daily, w))?;
        let monthly = periodic_mean(&daily, Period::Month, 0.8);
        write_artifact(&ws.aggregate(id, "monthly"), |w| write_period_series(&monthly, w))?;
        let annual = periodic_mean(&daily, Period::Year, 0.8);
        write_artifact(&ws.aggregate(id, "annual"), |w| write_period_series(&annual, w))?;
        for (decade, matrix) in hovmoller(&probs) {
            write_artifact(&ws.aggregate(id, &format!("hovmoller_{decade}")), |w| {
                write_hovmoller(&matrix, w)
            })?;
        }
    }
    Ok(())
}

pub fn features(
    loaded: &Loaded,
    out: &Path,
    set: Option<VariableSet>,
    station: Option<&str>,
) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    let gridded_rel = loaded
        .config
        .gridded
        .as_deref()
        .ok_or_else(|| Error::Config("config names no gridded directory".into()))?;
    let gridded = load_gridded(&loaded.resolve(gridded_rel))?;
    let fields: Vec<String> = gridded.fields.keys().cloned().collect();
    let sets: Vec<VariableSet> = match set {
        Some(s) => vec![s],
        None => vec![VariableSet::Direct, VariableSet::Full],
    };
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let foehn_type = st.meta.foehn_type.ok_or_else(|| {
            Error::Config(format!("valley station {id} has no foehn type"))
        })?;
        let star = build_star(&st.meta, &loaded.config.ridge, foehn_type)?;
        for &vs in &sets {
            let recipes = default_recipes(&fields, vs);
            let table = assemble(&gridded, &star, &recipes, vs)?;
            info!(
                "{id}/{vs}: {} columns x {} rows (dropped {}+{} lag edge rows)",
                table.n_cols(),
                table.n_rows(),
                table.dropped_leading,
                table.dropped_trailing
            );
            let stem = ws.features_stem(id, vs);
            std::fs::create_dir_all(stem.parent().unwrap())?;
            let tmp = stem.with_file_name(format!(
                ".{}.tmp",
                stem.file_name().unwrap().to_string_lossy()
            ));
            write_feature_table(&table, &recipes, &tmp)?;
            for ext in ["csv", "columns.json"] {
                std::fs::rename(tmp.with_extension(ext), stem.with_extension(ext))?;
            }
            info!("wrote {}", stem.with_extension("csv").display());
        }
    }
    Ok(())
}

fn load_station_inputs(
    ws: &Workspace,
    id: &str,
    set: VariableSet,
) -> Result<(HourlyLabelSeries, foehn_core::features::FeatureTable)> {
    let labels = read_hourly_labels(open_buffered(&ws.labels(id))?)?;
    let table = load_feature_table(&ws.features_stem(id, set))?;
    Ok((labels, table))
}

pub fn train(
    loaded: &Loaded,
    out: &Path,
    learner: LearnerKind,
    set: VariableSet,
    station: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    let seed = seed.unwrap_or(loaded.config.seed);
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let (labels, table) = load_station_inputs(&ws, id, set)?;
        info!("training {id}/{learner}/{set} on {} feature columns", table.n_cols());
        let trained = train_full_period(id, &labels, &table, learner, &loaded.config.learners, seed)?;
        for s in &trained.skipped {
            crate::util::log("warn", &format!("skipped: {s}"));
        }
        write_atomic(
            &ws.models(id, learner, set),
            &serde_json::to_vec_pretty(&trained.models)?,
        )?;
        info!("wrote {}", ws.models(id, learner, set).display());
    }
    Ok(())
}

pub fn cv(
    loaded: &Loaded,
    out: &Path,
    learners: &[LearnerKind],
    set: VariableSet,
    station: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    let seed = seed.unwrap_or(loaded.config.seed);
    let plan = make_folds(loaded.config.cv.start_year, loaded.config.cv.end_year)?;
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let (labels, table) = load_station_inputs(&ws, id, set)?;
        info!("running {}-fold CV for {id}/{set}", plan.folds.len());
        let report = run_cv(id, &labels, &table, &plan, learners, &loaded.config.learners, seed)?;
        for s in &report.skipped {
            crate::util::log("warn", &format!("skipped: {s}"));
        }
        for &learner in learners {
            if let Some(b) = report.mean_test_brier(learner, set) {
                info!("{id}/{learner}/{set}: mean test Brier {b:.6}");
            }
        }
        write_artifact(&ws.cv(id, set), |w| write_score_report(&report, w))?;
    }
    Ok(())
}

pub fn reconstruct_cmd(
    loaded: &Loaded,
    out: &Path,
    learner: LearnerKind,
    set: VariableSet,
    station: Option<&str>,
    start_year: Option<i32>,
    end_year: Option<i32>,
) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    let start = start_year.unwrap_or(loaded.config.cv.start_year);
    let end = end_year.unwrap_or(loaded.config.cv.end_year);
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let models: Vec<Option<LearnerModel>> = read_json(&ws.models(id, learner, set))?;
        let table = load_feature_table(&ws.features_stem(id, set))?;
        info!("reconstructing {id}/{learner}/{set} over {start}-{end}");
        let recon = reconstruct(id, &models, &table, start, end)?;
        write_artifact(&ws.recon(id, learner, set), |w| write_reconstruction(&recon, w))?;

        let observed = match ws.labels(id) {
            p if p.exists() => Some(read_hourly_labels(open_buffered(&p)?)?),
            _ => None,
        };
        let rows = reconstruction_report(&recon, observed.as_ref());
        write_artifact(&ws.recon_years(id, learner, set), |w| {
            write_year_summaries(&rows, w)
        })?;
    }
    Ok(())
}

/// Parses the reconstruction CSV back into a `Reconstruction`.
pub fn read_reconstruction(
    path: &Path,
    station: &str,
    learner: LearnerKind,
    set: VariableSet,
) -> Result<Reconstruction> {
    let mut lines = open_buffered(path)?.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity(format!("{}: empty file", path.display())))??;
    if header.trim() != "timestamp,p" {
        return Err(Error::Integrity(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.trim()
        )));
    }
    let mut times = Vec::new();
    let mut p = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (ts, v) = line.split_once(',').ok_or_else(|| {
            Error::Integrity(format!("{}: malformed row {line:?}", path.display()))
        })?;
        times.push(parse_utc(ts)?);
        p.push(v.parse::<f64>().map_err(|_| {
            Error::Integrity(format!("{}: invalid probability {v:?}", path.display()))
        })?);
    }
    if times.is_empty() {
        return Err(Error::Integrity(format!("{}: no rows", path.display())));
    }
    let axis = TimeAxis::new(times[0], HOUR_SECS, times.len());
    for (i, t) in times.iter().enumerate() {
        if *t != axis.at(i) {
            return Err(Error::Integrity(format!(
                "{}: rows leave the hourly grid at {t}",
                path.display()
            )));
        }
    }
    Ok(Reconstruction {
        station: station.to_string(),
        learner,
        set,
        times: axis,
        p,
    })
}

pub fn decompose(
    loaded: &Loaded,
    out: &Path,
    learner: LearnerKind,
    set: VariableSet,
    station: Option<&str>,
) -> Result<()> {
    let ws = Workspace(out.to_path_buf());
    for st in loaded.valleys(station)? {
        let id = &st.meta.id;
        let recon = read_reconstruction(&ws.recon(id, learner, set), id, learner, set)?;
        let daily = daily_max(&recon.as_prob_series());
        let monthly = periodic_mean(&daily, Period::Month, 0.0);
        // the span's first hour is owned by the last day of the prior year,
        // leaving a stub month; the fit starts at the first January
        let skip = monthly
            .starts
            .iter()
            .position(|d| d.month() == 1)
            .ok_or_else(|| Error::Estimation("reconstruction covers no January".into()))?;
        let y: Vec<f64> = monthly.values[skip..]
            .iter()
            .map(|v| v.ok_or_else(|| Error::Integrity("reconstruction left an empty month".into())))
            .collect::<Result<_>>()?;
        let start_year = monthly.starts[skip].year();
        info!("decomposing {} monthly values for {id}/{learner}/{set}", y.len());
        let fit = fit_str(&y, &StrOptions::default())?;
        info!(
            "{id}: lambda_t={} lambda_s={} edf={:.1} trend_significant={}",
            fit.lambda_t,
            fit.lambda_s,
            fit.edf,
            trend_significance(&fit)
        );
        write_artifact(&ws.str_fit(id, learner, set), |w| {
            write_str_fit(&fit, start_year, w)
        })?;
        let (decades, mean) = decade_seasonal(&fit, start_year);
        write_artifact(&ws.decades(id, learner, set), |w| {
            write_decade_seasonal(&decades, &mean, w)
        })?;
    }
    Ok(())
}
