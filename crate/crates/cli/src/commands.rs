//! The commands as pure functions from resolved configuration and input
//! bytes to output files plus a manifest. Nothing here touches the disk;
//! [`write_run`] does that in one place.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use graspdec_core::classify::{build_accuracy_table, Accuracy, Split, SubjectAccuracies};
use graspdec_core::csp::{CspModel, FeatureVector};
use graspdec_core::model::{standard_montage, Band, GraspClass, Phase};
use graspdec_core::pipeline::{check_session, decode_session, PipelineConfig};
use graspdec_core::preprocess::{band_filter, Preprocessor};
use graspdec_core::simulate::{run_protocol, synthesize_eeg, GroundTruthConfig, ProtocolConfig};
use graspdec_core::topomap::{export_csp_maps, grid_csv, MapKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::formats::{json_bytes, parse_json, session_outputs, SessionFiles, MANIFEST_FILE};
use crate::manifest::{FileDigest, NamedFilter, RunManifest};

pub type OutputFile = (String, Vec<u8>);

/// Output files of one command, with their manifest, plus anything worth
/// telling the user on stderr.
#[derive(Debug, Clone)]
pub struct Run {
    pub files: Vec<OutputFile>,
    pub manifest: RunManifest,
    pub notes: Vec<String>,
}

impl Run {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

/// Writes every output file and then the manifest. `out_dir` may exist;
/// its parent must.
pub fn write_run(out_dir: &Path, run: &Run) -> Result<(), CliError> {
    match fs::create_dir(out_dir) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists && out_dir.is_dir() => {}
        Err(e) => return Err(CliError::io(out_dir, e)),
    }
    let write = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let path = out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    };
    for (name, bytes) in &run.files {
        write(name, bytes)?;
    }
    write(MANIFEST_FILE, &json_bytes(&run.manifest))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub protocol: ProtocolConfig,
    pub ground_truth: GroundTruthConfig,
}

impl SimulationConfig {
    /// One seed for both the schedule and the signals.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.protocol.seed = seed;
        self.ground_truth.seed = seed;
        self
    }
}

pub fn simulate(config: &SimulationConfig) -> Result<Run, CliError> {
    if config.protocol.sample_rate_hz != config.ground_truth.sample_rate_hz {
        return Err(CliError::input(format!(
            "protocol runs at {} Hz but the ground truth at {} Hz",
            config.protocol.sample_rate_hz, config.ground_truth.sample_rate_hz
        )));
    }
    let events = run_protocol(&config.protocol).map_err(|e| CliError::input(e.to_string()))?;
    let art = synthesize_eeg(&events, &config.ground_truth)?;

    let bands: BTreeSet<Band> = config.ground_truth.sources.iter().map(|s| s.band).collect();
    let filter_designs = bands
        .into_iter()
        .map(|b| {
            let filter = band_filter(&b.definition(), config.ground_truth.sample_rate_hz)
                .map_err(|e| CliError::input(e.to_string()))?;
            Ok(NamedFilter { name: format!("source_{b}"), filter })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let files = session_outputs(&art.recording, &art.events, Some(&art.ground_truth));
    let manifest = RunManifest::new("simulate", Some(config.protocol.seed), config, filter_designs, vec![], &files);
    Ok(Run { files, manifest, notes: vec![] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: Accuracy,
    pub csp_model: String,
    pub svm_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub band: Band,
    pub phase: Phase,
    pub accuracy: Accuracy,
    pub folds: Vec<FoldSummary>,
    pub rejected_trials: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFeatures {
    pub band: Band,
    pub phase: Phase,
    pub fold: usize,
    pub split: Split,
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub predictions: Vec<GraspClass>,
}

fn model_stem(phase: Phase, band: Band, fold: usize) -> String {
    format!("models/{phase}_{band}_fold{fold}")
}

pub fn pipeline(session: &SessionFiles, config: &PipelineConfig) -> Result<Run, CliError> {
    config.evaluation.validate().map_err(|e| CliError::input(e.to_string()))?;
    let (recording, events) = session.parse()?;
    let report = check_session(&recording, &events);
    if report.has_errors() {
        return Err(CliError::Validation(report));
    }
    let notes: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();

    let fs_hz = recording.sample_rate_hz;
    let pre = Preprocessor::design(&config.preprocess, fs_hz).map_err(|e| CliError::input(e.to_string()))?;
    let mut filter_designs = vec![
        NamedFilter { name: "notch".into(), filter: pre.notch },
        NamedFilter { name: "broadband".into(), filter: pre.broadband },
    ];
    for band in &config.bands {
        let filter = band_filter(band, fs_hz).map_err(|e| CliError::input(e.to_string()))?;
        filter_designs.push(NamedFilter { name: format!("band_{}", band.name), filter });
    }

    let decoding = decode_session(&recording, &events, config)?;

    let mut files: Vec<OutputFile> = Vec::new();
    let mut summaries = Vec::new();
    let mut features = Vec::new();
    for r in &decoding.results {
        let band = r.band.name;
        let mut folds = Vec::new();
        for (k, fold) in r.evaluation.folds.iter().enumerate() {
            let stem = model_stem(r.phase, band, k);
            let csp_model = format!("{stem}_csp.json");
            let svm_model = format!("{stem}_svm.json");
            files.push((csp_model.clone(), json_bytes(&fold.csp)));
            files.push((svm_model.clone(), json_bytes(&fold.svm)));
            folds.push(FoldSummary {
                fold: k,
                n_train: fold.split.train.len(),
                n_test: fold.split.test.len(),
                accuracy: fold.accuracy,
                csp_model,
                svm_model,
            });
            features.push(FoldFeatures {
                band,
                phase: r.phase,
                fold: k,
                split: fold.split.clone(),
                train: fold.train_features.clone(),
                test: fold.test_features.clone(),
                predictions: fold.predictions.clone(),
            });
        }
        summaries.push(EvaluationSummary {
            band,
            phase: r.phase,
            accuracy: r.evaluation.accuracy,
            folds,
            rejected_trials: r.rejected.clone(),
        });
    }
    files.push(("accuracy.json".into(), json_bytes(&decoding.accuracies())));
    files.push(("evaluation.json".into(), json_bytes(&summaries)));
    files.push(("features.json".into(), json_bytes(&features)));

    let inputs = session.named().iter().map(|(n, b)| FileDigest::of(n, b)).collect();
    let manifest = RunManifest::new("pipeline", Some(config.evaluation.seed), config, filter_designs, inputs, &files);
    Ok(Run { files, manifest, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Md,
}

impl ReportFormat {
    pub fn file_name(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "table.csv",
            ReportFormat::Md => "table.md",
        }
    }
}

/// The report's inputs are small, so they live in the manifest itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPlan {
    pub format: ReportFormat,
    pub subjects: Vec<SubjectAccuracies>,
}

pub fn report(plan: &ReportPlan, inputs: Vec<FileDigest>) -> Result<Run, CliError> {
    let table = build_accuracy_table(&plan.subjects).map_err(|e| CliError::input(e.to_string()))?;
    let text = match plan.format {
        ReportFormat::Csv => table.to_csv(),
        ReportFormat::Md => table.to_markdown(),
    };
    let files = vec![(plan.format.file_name().to_string(), text.into_bytes())];
    let manifest = RunManifest::new("report", None, plan, vec![], inputs, &files);
    Ok(Run { files, manifest, notes: vec![] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopomapPlan {
    /// Name of the model file, resolved against the input directory on replay.
    pub model_file: String,
    pub resolution: usize,
    pub kind: MapKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub file: String,
    pub component: usize,
    pub rank: usize,
    pub eigenvalue: f64,
    pub selected: bool,
    pub csp_number: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSelection {
    pub band: Option<Band>,
    pub phase: Phase,
    pub kind: MapKind,
    pub resolution: usize,
    pub maps: Vec<MapEntry>,
}

pub fn topomap(model_bytes: &[u8], plan: &TopomapPlan) -> Result<Run, CliError> {
    let model: CspModel = parse_json(model_bytes, &plan.model_file)?;
    let maps = export_csp_maps(&model, &standard_montage(), plan.resolution, plan.kind)?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for m in &maps {
        let file = format!("{}_{}.csv", plan.kind.name(), m.rank);
        files.push((file.clone(), grid_csv(m).into_bytes()));
        entries.push(MapEntry {
            file,
            component: m.component,
            rank: m.rank,
            eigenvalue: m.eigenvalue,
            selected: m.selected,
            csp_number: m.csp_number,
        });
    }
    let selection = MapSelection {
        band: model.band.map(|b| b.name),
        phase: model.phase,
        kind: plan.kind,
        resolution: plan.resolution,
        maps: entries,
    };
    files.push(("selection.json".into(), json_bytes(&selection)));
    let inputs = vec![FileDigest::of(&plan.model_file, model_bytes)];
    let manifest = RunManifest::new("topomap", None, plan, vec![], inputs, &files);
    Ok(Run { files, manifest, notes: vec![] })
}

fn config_of<T: serde::de::DeserializeOwned>(manifest: &RunManifest) -> Result<T, CliError> {
    serde_json::from_value(manifest.config.clone())
        .map_err(|e| CliError::input(format!("manifest config for `{}`: {e}", manifest.command)))
}

fn check_input(expected: &[FileDigest], name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let found = FileDigest::of(name, bytes);
    match expected.iter().find(|d| d.name == name) {
        Some(d) if d.sha256 == found.sha256 => Ok(()),
        Some(d) => Err(CliError::input(format!("input {name} has digest {}, manifest expects {}", found.sha256, d.sha256))),
        None => Err(CliError::input(format!("manifest does not list input {name}"))),
    }
}

/// Reruns the command a manifest describes. Inputs are read by name from
/// `input_dir` and must match the recorded digests; the regenerated outputs
/// must match too.
pub fn replay(manifest: &RunManifest, input_dir: Option<&Path>) -> Result<Run, CliError> {
    if manifest.tool != crate::manifest::TOOL || manifest.version != crate::manifest::VERSION {
        return Err(CliError::input(format!(
            "manifest was written by {} {}, this is {} {}",
            manifest.tool,
            manifest.version,
            crate::manifest::TOOL,
            crate::manifest::VERSION
        )));
    }
    let need_dir = || input_dir.ok_or_else(|| CliError::input(format!("replaying `{}` needs --inputs", manifest.command)));
    let run = match manifest.command.as_str() {
        "simulate" => simulate(&config_of(manifest)?)?,
        "pipeline" => {
            let session = SessionFiles::read(need_dir()?)?;
            for (name, bytes) in session.named() {
                check_input(&manifest.inputs, name, bytes)?;
            }
            pipeline(&session, &config_of(manifest)?)?
        }
        "report" => report(&config_of(manifest)?, manifest.inputs.clone())?,
        "topomap" => {
            let plan: TopomapPlan = config_of(manifest)?;
            let bytes = crate::formats::read_file(&need_dir()?.join(&plan.model_file))?;
            check_input(&manifest.inputs, &plan.model_file, &bytes)?;
            topomap(&bytes, &plan)?
        }
        other => return Err(CliError::input(format!("unknown command `{other}` in manifest"))),
    };
    if run.manifest.outputs != manifest.outputs {
        let differing: Vec<&str> = run
            .manifest
            .outputs
            .iter()
            .filter(|o| !manifest.outputs.contains(o))
            .map(|o| o.name.as_str())
            .collect();
        return Err(CliError::Numerical(format!("replay did not reproduce the recorded outputs: {differing:?}")));
    }
    Ok(run)
}
