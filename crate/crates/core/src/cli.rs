//! Command-line driver: `generate`, `train` and `evaluate`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::eval::{
    fit_all_kinds, run_ablations, run_data_efficiency, run_proactivity_sweep, run_table1, FitOptions, Fitted,
    PredictorKind, PredictorSet, Report,
};
use crate::gnn::{ModelConfig, DEFAULT_EPOCHS};
use crate::scene::hex_digest;
use crate::sim::{generate_dataset, read_dataset, read_manifest, write_dataset, DatasetManifest, RoutineDataset, SimConfig};
use crate::timecode::TimeEncodingConfig;

pub const THREADS_ENV: &str = "ROUTINE_DYNAMICS_THREADS";
pub const TRAIN_MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "routine-dynamics", version, about = "Predict household object relocations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate households and write a dataset directory.
    Generate {
        /// Simulation config (JSON); the built-in default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one predictor per household and write checkpoints.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PredictorArg::Gnn)]
        predictor: PredictorArg,
        /// Use only the first n training days.
        #[arg(long)]
        train_days: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run an experiment and write reports.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Experiment::Table1)]
        experiment: Experiment,
        /// Checkpoint directories written by `train`; one per predictor.
        #[arg(long = "checkpoints")]
        checkpoints: Vec<PathBuf>,
        /// Proactivity window in minutes.
        #[arg(long, default_value_t = 30)]
        delta: u32,
        /// Predictors retrained by `data-efficiency`; all when omitted.
        #[arg(long, value_enum)]
        predictor: Vec<PredictorArg>,
        /// Training budgets of `data-efficiency`, comma separated.
        #[arg(long, value_delimiter = ',')]
        train_days: Vec<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model seed; defaults to the dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long)]
    ablate_attention: bool,
    #[arg(long, value_enum, default_value_t = TimeEncodingArg::Sinusoidal)]
    time_encoding: TimeEncodingArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Gnn,
    Fremen,
    Static,
}

impl From<PredictorArg> for PredictorKind {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::Gnn => PredictorKind::Gnn,
            PredictorArg::Fremen => PredictorKind::Fremen,
            PredictorArg::Static => PredictorKind::Static,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TimeEncodingArg {
    Sinusoidal,
    Linear,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Table1,
    Sweep,
    DataEfficiency,
    Ablation,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Sweep => "sweep",
            Experiment::DataEfficiency => "data-efficiency",
            Experiment::Ablation => "ablation",
        }
    }
}

impl ModelArgs {
    fn options(&self, default_seed: u64) -> FitOptions {
        FitOptions {
            gnn: ModelConfig {
                epochs: self.epochs,
                seed: self.seed.unwrap_or(default_seed),
                attention_enabled: !self.ablate_attention,
                time_encoding: match self.time_encoding {
                    TimeEncodingArg::Sinusoidal => TimeEncodingConfig::default(),
                    TimeEncodingArg::Linear => TimeEncodingConfig::linear(),
                },
                ..ModelConfig::default()
            },
            ..FitOptions::default()
        }
    }
}

/// Written next to the checkpoints of one `train` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub version: String,
    pub predictor: String,
    pub dataset_digest: String,
    pub dataset_seed: u64,
    pub config_digest: String,
    pub catalog_digest: String,
    pub train_days: usize,
    pub options: serde_json::Value,
    /// Tuned or configured hyper-parameters per household.
    pub hyper: Vec<serde_json::Value>,
    pub epoch_losses: Vec<Vec<f64>>,
    pub files: BTreeMap<String, String>,
}

/// Written next to the reports of one `evaluate` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateManifest {
    pub version: String,
    pub experiment: String,
    pub dataset_digest: String,
    pub dataset_seed: u64,
    pub config_digest: String,
    /// Digest of each checkpoint run's manifest, keyed by predictor.
    pub checkpoints: BTreeMap<String, String>,
    pub options: serde_json::Value,
    pub reports: BTreeMap<String, String>,
}

pub fn checkpoint_file(k: usize) -> String {
    format!("household_{k}.ckpt")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(text.as_bytes()))
}

fn load_data(dir: &Path) -> Result<(DatasetManifest, Vec<RoutineDataset>)> {
    Ok((read_manifest(dir)?, read_dataset(dir)?))
}

fn budgeted(datasets: &[RoutineDataset], days: Option<usize>) -> Result<Vec<RoutineDataset>> {
    let Some(n) = days else {
        return Ok(datasets.to_vec());
    };
    datasets
        .iter()
        .map(|d| {
            if n == 0 || n > d.train.len() {
                return Err(Error::Config(format!("--train-days {n}: {} training days available", d.train.len())));
            }
            Ok(RoutineDataset {
                train: d.train[..n].to_vec(),
                ..d.clone()
            })
        })
        .collect()
}

pub fn cmd_generate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<DatasetManifest> {
    let config = match config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let seed = seed.unwrap_or(config.seed);
    let generated = generate_dataset(&config, seed)?;
    let manifest = write_dataset(out, &generated)?;
    eprintln!(
        "wrote {} households ({} train + {} test days) to {}",
        manifest.households,
        manifest.train_days,
        manifest.test_days,
        out.display()
    );
    Ok(manifest)
}

pub fn cmd_train(data: &Path, out: &Path, kind: PredictorKind, train_days: Option<usize>, model: &ModelArgs) -> Result<TrainManifest> {
    let (dataset, datasets) = load_data(data)?;
    let datasets = budgeted(&datasets, train_days)?;
    let opts = model.options(dataset.seed);
    let set = fit_all_kinds(&datasets, &[kind], None, &opts)?.pop().unwrap();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = BTreeMap::new();
    for (k, fitted) in set.per_household.iter().enumerate() {
        for (epoch, loss) in fitted.epoch_losses.iter().enumerate() {
            eprintln!("household {k} epoch {} loss {loss:.6}", epoch + 1);
        }
        let ckpt = Checkpoint {
            catalog_digest: dataset.catalog_digest.clone(),
            model: fitted.model.clone(),
        };
        let bytes = ckpt.to_bytes()?;
        let path = out.join(checkpoint_file(k));
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        files.insert(checkpoint_file(k), hex_digest(&bytes));
    }
    let manifest = TrainManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        predictor: kind.name().to_string(),
        dataset_digest: dataset.dataset_digest.clone(),
        dataset_seed: dataset.seed,
        config_digest: dataset.config_digest.clone(),
        catalog_digest: dataset.catalog_digest.clone(),
        train_days: datasets.first().map_or(0, |d| d.train.len()),
        options: serde_json::to_value(&opts.gnn)?,
        hyper: set.per_household.iter().map(|f| f.hyper.clone()).collect(),
        epoch_losses: set.per_household.iter().map(|f| f.epoch_losses.clone()).collect(),
        files,
    };
    write_json(&out.join(TRAIN_MANIFEST), &manifest)?;
    eprintln!("wrote {} {} checkpoints to {}", manifest.files.len(), manifest.predictor, out.display());
    Ok(manifest)
}

/// Checkpoints of one `train` run, checked against the dataset catalog.
pub fn load_checkpoints(dir: &Path, dataset: &DatasetManifest) -> Result<(PredictorSet, String)> {
    let path = dir.join(TRAIN_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: TrainManifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))?;
    let mut per_household = Vec::with_capacity(dataset.households);
    for k in 0..dataset.households {
        let ckpt = Checkpoint::load(&dir.join(checkpoint_file(k)))?;
        if ckpt.catalog_digest != dataset.catalog_digest {
            return Err(Error::CatalogMismatch);
        }
        per_household.push(Fitted {
            hyper: manifest.hyper.get(k).cloned().unwrap_or_default(),
            epoch_losses: Vec::new(),
            model: ckpt.model,
        });
    }
    let name = per_household
        .first()
        .map_or(manifest.predictor.as_str(), |f| f.model.kind())
        .to_string();
    Ok((PredictorSet { name, per_household }, hex_digest(text.as_bytes())))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    data: &Path,
    out: &Path,
    experiment: Experiment,
    checkpoints: &[PathBuf],
    delta: u32,
    predictors: &[PredictorKind],
    train_days: &[usize],
    model: &ModelArgs,
) -> Result<EvaluateManifest> {
    let (dataset, datasets) = load_data(data)?;
    let opts = model.options(dataset.seed);
    let mut loaded = BTreeMap::new();
    let mut reports = match experiment {
        Experiment::Table1 | Experiment::Sweep => {
            if checkpoints.is_empty() {
                return Err(Error::MissingPredictor(format!(
                    "{} needs --checkpoints from `train`",
                    experiment.name()
                )));
            }
            let mut sets = Vec::new();
            for dir in checkpoints {
                let (set, digest) = load_checkpoints(dir, &dataset)?;
                if loaded.insert(set.name.clone(), digest).is_some() {
                    return Err(Error::Config(format!("two checkpoint sets for `{}`", set.name)));
                }
                sets.push(set);
            }
            if experiment == Experiment::Table1 {
                vec![run_table1(&datasets, &sets, delta)?]
            } else {
                run_proactivity_sweep(&datasets, &sets)?
            }
        }
        Experiment::DataEfficiency => {
            let kinds = if predictors.is_empty() { PredictorKind::ALL.to_vec() } else { predictors.to_vec() };
            let budgets = if train_days.is_empty() { (1..=10).map(|i| 5 * i).collect() } else { train_days.to_vec() };
            run_data_efficiency(&datasets, &kinds, &budgets, &opts, delta)?
        }
        Experiment::Ablation => vec![run_ablations(&datasets, &opts, delta)?],
    };
    let mut written = BTreeMap::new();
    for r in &mut reports {
        r.seed = dataset.seed;
        r.config_digest = dataset.config_digest.clone();
        for path in r.write(out)? {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            written.insert(path.file_name().unwrap().to_string_lossy().into_owned(), hex_digest(&bytes));
        }
        print_report(r);
    }
    let manifest = EvaluateManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: experiment.name().to_string(),
        dataset_digest: dataset.dataset_digest.clone(),
        dataset_seed: dataset.seed,
        config_digest: dataset.config_digest.clone(),
        checkpoints: loaded,
        options: serde_json::to_value(&opts.gnn)?,
        reports: written,
    };
    write_json(&out.join(format!("manifest_{}.json", experiment.name())), &manifest)?;
    Ok(manifest)
}

fn print_report(r: &Report) {
    println!("# {} {}", r.experiment, r.label);
    print!("{}", r.to_csv());
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    // A pool already built by an embedding program is left alone.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate { config, out, seed } => cmd_generate(config.as_deref(), &out, seed).map(drop),
        Command::Train {
            data,
            out,
            predictor,
            train_days,
            model,
        } => cmd_train(&data, &out, predictor.into(), train_days, &model).map(drop),
        Command::Evaluate {
            data,
            out,
            experiment,
            checkpoints,
            delta,
            predictor,
            train_days,
            model,
        } => {
            let kinds: Vec<PredictorKind> = predictor.into_iter().map(Into::into).collect();
            cmd_evaluate(&data, &out, experiment, &checkpoints, delta, &kinds, &train_days, &model).map(drop)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
