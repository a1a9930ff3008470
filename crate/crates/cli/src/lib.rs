//! The `graspdec` command line: simulate sessions, decode them, tabulate
//! accuracies and export CSP scalp maps, each run leaving a manifest that
//! can be replayed.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use graspdec_core::classify::{EvaluationScheme, SubjectAccuracies};
use graspdec_core::model::{Band, Phase};
use graspdec_core::pipeline::PipelineConfig;
use graspdec_core::simulate::{GroundTruthConfig, ProtocolConfig};
use graspdec_core::topomap::MapKind;

use commands::{ReportFormat, ReportPlan, Run, SimulationConfig, TopomapPlan};
use error::CliError;
use formats::{parse_json, read_file, SessionFiles};
use manifest::{FileDigest, RunManifest};

pub const THREADS_ENV: &str = "GRASPDEC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "graspdec", version, about = "Decode grasp type (power vs precision) from 8-channel EEG")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 5 blocks of 10 trials.
    Default,
    /// 15 blocks of 10, 50 trials per object.
    FiftyPerObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Observation,
    Movement,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Holdout,
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Pattern,
    Filter,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a recording session.
    Simulate {
        /// JSON file with `protocol` and `ground_truth` sections.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Seeds both the trial schedule and the signals.
        #[arg(long)]
        seed: Option<u64>,
        /// Power:precision alpha power ratio of the planted sources.
        #[arg(long)]
        contrast: Option<f64>,
        #[arg(long)]
        subject: Option<String>,
        out_dir: PathBuf,
    },
    /// Decode a session: filter, epoch, fit CSP + SVM, evaluate.
    Pipeline {
        session_dir: PathBuf,
        out_dir: PathBuf,
        /// JSON pipeline configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated bands (default: all five).
        #[arg(long, value_delimiter = ',')]
        bands: Vec<Band>,
        #[arg(long, value_enum)]
        phase: Option<PhaseArg>,
        /// SVM box constraint.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_enum)]
        eval_scheme: Option<SchemeArg>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        /// Split without preserving class proportions.
        #[arg(long)]
        no_stratify: bool,
        /// Seed of the train/test split.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate accuracy files into subject rows and a mean row.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        /// Also write the table and a manifest here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Export interpolated scalp maps of a fitted CSP model.
    Topomap {
        model: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long, value_enum, default_value = "pattern")]
        kind: KindArg,
    },
    /// Rerun a manifest and check that it reproduces its outputs.
    Replay {
        manifest: PathBuf,
        out_dir: PathBuf,
        /// Directory holding the inputs the manifest lists.
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
}

/// Reads `GRASPDEC_THREADS` and sizes the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV}={raw}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(format!("{THREADS_ENV}: {e}")))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse_json(&read_file(path)?, &path.display().to_string())
}

fn simulation_config(
    config: Option<&Path>,
    preset: Option<Preset>,
    seed: Option<u64>,
    contrast: Option<f64>,
    subject: Option<String>,
) -> Result<SimulationConfig, CliError> {
    let mut cfg = match (config, preset) {
        (Some(path), _) => load_json(path)?,
        (None, Some(Preset::FiftyPerObject)) => SimulationConfig {
            protocol: ProtocolConfig::fifty_per_object(),
            ground_truth: GroundTruthConfig::default(),
        },
        (None, _) => SimulationConfig::default(),
    };
    if let Some(contrast) = contrast {
        if !(contrast.is_finite() && contrast > 0.0) {
            return Err(CliError::input(format!("--contrast {contrast} must be positive")));
        }
        let subject_id = cfg.ground_truth.subject_id.clone();
        cfg.ground_truth = GroundTruthConfig { subject_id, ..GroundTruthConfig::planted_alpha(cfg.ground_truth.seed, contrast) };
    }
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(subject) = subject {
        cfg.ground_truth.subject_id = subject;
    }
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn pipeline_config(
    config: Option<&Path>,
    bands: Vec<Band>,
    phase: Option<PhaseArg>,
    c: Option<f64>,
    eval_scheme: Option<SchemeArg>,
    test_fraction: Option<f64>,
    folds: Option<usize>,
    no_stratify: bool,
    seed: Option<u64>,
) -> Result<PipelineConfig, CliError> {
    let mut cfg: PipelineConfig = match config {
        Some(path) => load_json(path)?,
        None => PipelineConfig::default(),
    };
    if !bands.is_empty() {
        let mut bands = bands;
        bands.sort();
        bands.dedup();
        cfg.bands = bands.iter().map(Band::definition).collect();
    }
    match phase {
        Some(PhaseArg::Observation) => cfg.phases = vec![Phase::Observation],
        Some(PhaseArg::Movement) => cfg.phases = vec![Phase::Movement],
        Some(PhaseArg::Both) => cfg.phases = Phase::ALL.to_vec(),
        None => {}
    }
    if let Some(c) = c {
        cfg.evaluation.c_parameter = c;
    }
    if let Some(seed) = seed {
        cfg.evaluation.seed = seed;
    }
    let (current_fraction, current_k, current_stratified) = match cfg.evaluation.scheme {
        EvaluationScheme::HoldOut { test_fraction, stratified } => (Some(test_fraction), None, stratified),
        EvaluationScheme::KFold { k, stratified } => (None, Some(k), stratified),
    };
    let stratified = current_stratified && !no_stratify;
    let kind = eval_scheme.unwrap_or(match cfg.evaluation.scheme {
        EvaluationScheme::HoldOut { .. } => SchemeArg::Holdout,
        EvaluationScheme::KFold { .. } => SchemeArg::Kfold,
    });
    cfg.evaluation.scheme = match kind {
        SchemeArg::Holdout => {
            if folds.is_some() {
                return Err(CliError::input("--folds applies to --eval-scheme kfold"));
            }
            EvaluationScheme::HoldOut { test_fraction: test_fraction.or(current_fraction).unwrap_or(0.2), stratified }
        }
        SchemeArg::Kfold => {
            if test_fraction.is_some() {
                return Err(CliError::input("--test-fraction applies to --eval-scheme holdout"));
            }
            EvaluationScheme::KFold { k: folds.or(current_k).unwrap_or(5), stratified }
        }
    };
    cfg.evaluation.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(cfg)
}

/// What a command produced: the run itself, plus text for stdout.
pub struct Outcome {
    pub run: Option<Run>,
    pub stdout: String,
}

/// Executes one parsed command, writing its outputs.
pub fn execute(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate { config, preset, seed, contrast, subject, out_dir } => {
            let cfg = simulation_config(config.as_deref(), preset, seed, contrast, subject)?;
            let run = commands::simulate(&cfg)?;
            commands::write_run(&out_dir, &run)?;
            let trials = cfg.protocol.n_trials();
            let stdout = format!("simulated {trials} trials into {}\n", out_dir.display());
            Ok(Outcome { run: Some(run), stdout })
        }
        Command::Pipeline {
            session_dir,
            out_dir,
            config,
            bands,
            phase,
            c,
            eval_scheme,
            test_fraction,
            folds,
            no_stratify,
            seed,
        } => {
            let cfg = pipeline_config(
                config.as_deref(),
                bands,
                phase,
                c,
                eval_scheme,
                test_fraction,
                folds,
                no_stratify,
                seed,
            )?;
            let session = SessionFiles::read(&session_dir)?;
            let run = commands::pipeline(&session, &cfg)?;
            commands::write_run(&out_dir, &run)?;
            let acc: SubjectAccuracies = parse_json(run.file("accuracy.json").unwrap_or_default(), "accuracy.json")?;
            let stdout = acc
                .entries
                .iter()
                .map(|e| format!("{} {}: {}% of {}\n", e.band, e.phase, e.accuracy_percent, e.n_test))
                .collect();
            Ok(Outcome { run: Some(run), stdout })
        }
        Command::Report { files, format, out_dir } => {
            let mut subjects = Vec::new();
            let mut inputs = Vec::new();
            for path in &files {
                let bytes = read_file(path)?;
                subjects.push(parse_json::<SubjectAccuracies>(&bytes, &path.display().to_string())?);
                inputs.push(FileDigest::of(&file_name(path), &bytes));
            }
            let run = commands::report(&ReportPlan { format, subjects }, inputs)?;
            if let Some(dir) = &out_dir {
                commands::write_run(dir, &run)?;
            }
            let stdout = String::from_utf8_lossy(&run.files[0].1).into_owned();
            Ok(Outcome { run: Some(run), stdout })
        }
        Command::Topomap { model, out_dir, resolution, kind } => {
            let kind = match kind {
                KindArg::Pattern => MapKind::Pattern,
                KindArg::Filter => MapKind::Filter,
            };
            let plan = TopomapPlan { model_file: file_name(&model), resolution, kind };
            let run = commands::topomap(&read_file(&model)?, &plan)?;
            commands::write_run(&out_dir, &run)?;
            let stdout = format!("wrote {} files into {}\n", run.files.len(), out_dir.display());
            Ok(Outcome { run: Some(run), stdout })
        }
        Command::Replay { manifest, out_dir, inputs } => {
            let recorded: RunManifest = load_json(&manifest)?;
            let run = commands::replay(&recorded, inputs.as_deref())?;
            commands::write_run(&out_dir, &run)?;
            let stdout = format!("reproduced {} outputs of `{}`\n", run.files.len(), recorded.command);
            Ok(Outcome { run: Some(run), stdout })
        }
    }
}
