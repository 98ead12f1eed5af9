//! `foehn`: classification, learning, reconstruction and decomposition of
//! foehn wind events, driven by a single JSON config and a workspace
//! directory. Exit codes: 0 success, 1 usage error, 2 data/estimation error.

mod commands;
mod report;
mod svg;
mod util;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use foehn_core::features::VariableSet;
use foehn_core::learners::LearnerKind;
use foehn_core::Result;

fn parse_learner(s: &str) -> std::result::Result<LearnerKind, String> {
    s.parse().map_err(|e: foehn_core::Error| e.to_string())
}

fn parse_set(s: &str) -> std::result::Result<VariableSet, String> {
    s.parse().map_err(|e: foehn_core::Error| e.to_string())
}

#[derive(Parser)]
#[command(
    name = "foehn",
    version,
    about = "Probabilistic foehn classification and long-term reconstruction"
)]
struct Cli {
    /// worker threads for parallel jobs (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset plus a ready-to-run config
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// synthetic-generator spec JSON; defaults apply when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// span length in years, starting at the spec's start year
        #[arg(long)]
        years: Option<i32>,
    },
    /// Fit the mixture model and write 10-min posterior probabilities
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        station: Option<String>,
    },
    /// Upscale posteriors to hourly labels and climatological aggregates
    Aggregate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        station: Option<String>,
    },
    /// Assemble feature tables from the gridded fields
    Features {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// build one variable set only; default builds both
        #[arg(long, value_parser = parse_set)]
        set: Option<VariableSet>,
        #[arg(long)]
        station: Option<String>,
    },
    /// Fit the 24 hour-of-day models on the full labeled period
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_learner)]
        learner: LearnerKind,
        #[arg(long, default_value = "full", value_parser = parse_set)]
        set: VariableSet,
        #[arg(long)]
        station: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Blocked two-year cross-validation with pooled scoring
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// score one learner only; default scores all three
        #[arg(long, value_parser = parse_learner)]
        learner: Option<LearnerKind>,
        #[arg(long, default_value = "full", value_parser = parse_set)]
        set: VariableSet,
        #[arg(long)]
        station: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict hourly probabilities over a multi-year span
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_learner)]
        learner: LearnerKind,
        #[arg(long, default_value = "full", value_parser = parse_set)]
        set: VariableSet,
        #[arg(long)]
        station: Option<String>,
        #[arg(long)]
        start_year: Option<i32>,
        #[arg(long)]
        end_year: Option<i32>,
    },
    /// Season-trend decomposition of the reconstructed monthly series
    Decompose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_learner)]
        learner: LearnerKind,
        #[arg(long, default_value = "full", value_parser = parse_set)]
        set: VariableSet,
        #[arg(long)]
        station: Option<String>,
    },
    /// Render SVG figures and a summary from the workspace artifacts
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        station: Option<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth { out, spec, seed, years } => {
            commands::synth(&out, spec.as_deref(), seed, years)
        }
        Cmd::Classify { config, out, station } => {
            commands::classify(&commands::load(&config)?, &out, station.as_deref())
        }
        Cmd::Aggregate { config, out, station } => {
            commands::aggregate(&commands::load(&config)?, &out, station.as_deref())
        }
        Cmd::Features { config, out, set, station } => {
            commands::features(&commands::load(&config)?, &out, set, station.as_deref())
        }
        Cmd::Train { config, out, learner, set, station, seed } => commands::train(
            &commands::load(&config)?,
            &out,
            learner,
            set,
            station.as_deref(),
            seed,
        ),
        Cmd::Cv { config, out, learner, set, station, seed } => {
            let learners = match learner {
                Some(l) => vec![l],
                None => vec![LearnerKind::Lasso, LearnerKind::Stabsel, LearnerKind::Gbt],
            };
            commands::cv(
                &commands::load(&config)?,
                &out,
                &learners,
                set,
                station.as_deref(),
                seed,
            )
        }
        Cmd::Reconstruct { config, out, learner, set, station, start_year, end_year } => {
            commands::reconstruct_cmd(
                &commands::load(&config)?,
                &out,
                learner,
                set,
                station.as_deref(),
                start_year,
                end_year,
            )
        }
        Cmd::Decompose { config, out, learner, set, station } => commands::decompose(
            &commands::load(&config)?,
            &out,
            learner,
            set,
            station.as_deref(),
        ),
        Cmd::Report { config, out, station } => {
            report::report(&commands::load(&config)?, &out, station.as_deref())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Some(jobs) = cli.jobs {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            util::log("warn", "worker pool already initialized; --jobs ignored");
        }
    }
    if let Err(e) = run(cli) {
        util::log("error", &e.to_string());
        std::process::exit(2);
    }
}
