//! `skyplace` command-line driver.
//!
//! Each subcommand is one pipeline stage and communicates with the others
//! only through files in the output directory:
//!
//! ```text
//! collect  -> manifest.json, samples/*.csv
//! fit      -> fits.json
//! train    -> models.json
//! place    -> placement_<scheme>.json
//! evaluate -> evaluation_<scheme>.json
//! report   -> comparison.csv, ccdf_<scheme>.csv
//! ```
//!
//! Failures print one line `error: kind=<kind> msg="<message>"` to stderr and
//! exit with status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skyplace::harness::{
    collect_all, evaluate_scheme, fit_all, place_scheme, read_collection, read_fits, read_models, read_placement,
    read_report, train_models, write_fits, write_json_atomic, write_models, write_report, ModelBundle,
    PipelineOptions, Scheme, FITS_FILE, MODELS_FILE,
};
use skyplace::scenario::{Distribution, ExperimentConfig, ZoneId};
use skyplace::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "skyplace", version, about = "UAV placement for tail-latency constrained image uplinks")]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory shared by all stages.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Scheme for `place` and `evaluate`; all three when omitted.
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    /// Vehicle distribution for `place`.
    #[arg(long, global = true, value_enum, default_value = "even")]
    distribution: DistributionArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate block maxima at every training position of every zone.
    Collect,
    /// Fit a GEV law to each collected sample set.
    Fit,
    /// Train the per-zone regressors from the GEV fits.
    Train,
    /// Place the UAV and assign resolutions for a vehicle snapshot.
    Place,
    /// Monte-Carlo evaluation of placements.
    Evaluate {
        /// Number of evaluation blocks; the configured count when omitted.
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Merge evaluation reports into comparison and CCDF tables.
    Report {
        /// Evaluation JSON files; every `evaluation_<scheme>.json` in the
        /// output directory when omitted.
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Proposed,
    Fixed,
    Random,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Proposed => Scheme::Proposed,
            SchemeArg::Fixed => Scheme::Fixed,
            SchemeArg::Random => Scheme::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistributionArg {
    Even,
    Biased,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn schemes(cli: &Cli) -> Vec<Scheme> {
    match cli.scheme {
        Some(s) => vec![s.into()],
        None => Scheme::ALL.to_vec(),
    }
}

fn placement_path(dir: &Path, scheme: Scheme) -> PathBuf {
    dir.join(format!("placement_{scheme}.json"))
}

fn evaluation_path(dir: &Path, scheme: Scheme) -> PathBuf {
    dir.join(format!("evaluation_{scheme}.json"))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = load_config(cli)?;
    let dir = &cli.out;
    let hash = config.hash();
    match &cli.command {
        Command::Collect => {
            let (manifest, _) = collect_all(&config, &PipelineOptions::in_dir(dir))?;
            let mut out = vec![dir.join(skyplace::harness::MANIFEST_FILE)];
            out.extend(manifest.entries.iter().map(|e| dir.join(&e.csv_path)));
            Ok(out)
        }
        Command::Fit => {
            let (manifest, samples) = read_collection(dir, &hash)?;
            let zones = zones_in(manifest.entries.iter().map(|e| e.zone));
            manifest.check_complete(&config, &zones)?;
            let fits = fit_all(&config, &manifest, &samples)?;
            let path = dir.join(FITS_FILE);
            write_fits(&path, &hash, &fits)?;
            Ok(vec![path])
        }
        Command::Train => {
            let fits = read_fits(&dir.join(FITS_FILE), &hash)?;
            let zones = zones_in(fits.iter().map(|f| f.zone));
            let models = train_models(&config, &fits, &zones)?;
            let path = dir.join(MODELS_FILE);
            write_models(&path, &ModelBundle::new(&config, models))?;
            Ok(vec![path])
        }
        Command::Place => {
            let bundle = read_models(&dir.join(MODELS_FILE), &hash)?;
            let distribution = match cli.distribution {
                DistributionArg::Even => Distribution::Even,
                DistributionArg::Biased => Distribution::Biased(config.biased_zone_weights.clone()),
            };
            let mut out = Vec::new();
            for scheme in schemes(cli) {
                let p = place_scheme(&bundle.models, &config, &distribution, scheme, config.master_seed)?;
                let path = placement_path(dir, scheme);
                write_json_atomic(&path, &p)?;
                out.push(path);
            }
            Ok(out)
        }
        Command::Evaluate { blocks } => {
            let n = blocks.unwrap_or(config.evaluation_blocks);
            let mut out = Vec::new();
            for scheme in schemes(cli) {
                let p = read_placement(&placement_path(dir, scheme), &hash)?;
                let r = evaluate_scheme(&p, &config, n, config.master_seed)?;
                let path = evaluation_path(dir, scheme);
                write_json_atomic(&path, &r)?;
                out.push(path);
            }
            Ok(out)
        }
        Command::Report { inputs } => {
            let paths: Vec<PathBuf> = if inputs.is_empty() {
                Scheme::ALL
                    .iter()
                    .map(|&s| evaluation_path(dir, s))
                    .filter(|p| p.exists())
                    .collect()
            } else {
                inputs.clone()
            };
            if paths.is_empty() {
                return Err(Error::Empty("evaluation report list"));
            }
            let reports = paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
            write_report(dir, &reports)
        }
    }
}

/// Distinct zones in first-seen order.
fn zones_in(zones: impl Iterator<Item = ZoneId>) -> Vec<ZoneId> {
    let mut out: Vec<ZoneId> = Vec::new();
    for z in zones {
        if !out.contains(&z) {
            out.push(z);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
