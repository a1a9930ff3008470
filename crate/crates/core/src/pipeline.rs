//! Whole-session decoding: validation, cleanup, filter bank, epoching and a
//! leakage-safe CSP + SVM evaluation for every requested (band, phase).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate_epochs, AccuracyEntry, EpochEvaluation, EvalError, EvaluationConfig, SubjectAccuracies};
use crate::epoching::{extract_epochs, BoundaryError};
use crate::model::{
    standard_bands, validate_events, validate_recording, BandDefinition, EventMarker, Phase, Recording,
    ValidationReport,
};
use crate::preprocess::{band_filter, filtfilt_rows, FilterError, PreprocessConfig, Preprocessor};
use crate::simulate::{validate_event_log, ProtocolError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub bands: Vec<BandDefinition>,
    pub phases: Vec<Phase>,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            bands: standard_bands(),
            phases: Phase::ALL.to_vec(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("recording failed validation")]
    Validation(ValidationReport),
    #[error(transparent)]
    Events(#[from] ProtocolError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("{band} {phase}: {source}")]
    Evaluation { band: String, phase: Phase, source: EvalError },
    #[error("nothing to decode: no bands or no phases requested")]
    NothingRequested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPhaseResult {
    pub band: BandDefinition,
    pub phase: Phase,
    pub evaluation: EpochEvaluation,
    /// Trials whose window ran past the recording.
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDecoding {
    pub subject_id: String,
    pub results: Vec<BandPhaseResult>,
}

impl SessionDecoding {
    pub fn accuracies(&self) -> SubjectAccuracies {
        SubjectAccuracies {
            subject_id: self.subject_id.clone(),
            entries: self
                .results
                .iter()
                .map(|r| AccuracyEntry {
                    phase: r.phase,
                    band: r.band.name,
                    accuracy_percent: r.evaluation.accuracy.percent,
                    n_test: r.evaluation.accuracy.total,
                })
                .collect(),
        }
    }
}

/// Validation errors (warnings excluded) for a recording and its events.
pub fn check_session(recording: &Recording, events: &[EventMarker]) -> ValidationReport {
    let mut report = validate_recording(recording);
    report.violations.extend(validate_events(events, recording.n_samples()).violations);
    report
}

pub fn decode_session(
    recording: &Recording,
    events: &[EventMarker],
    config: &PipelineConfig,
) -> Result<SessionDecoding, PipelineError> {
    if config.bands.is_empty() || config.phases.is_empty() {
        return Err(PipelineError::NothingRequested);
    }
    let report = check_session(recording, events);
    if report.has_errors() {
        return Err(PipelineError::Validation(report));
    }
    validate_event_log(events)?;

    let fs = recording.sample_rate_hz;
    let clean = Preprocessor::design(&config.preprocess, fs)?.apply(recording.samples.view())?;

    let per_band = config
        .bands
        .par_iter()
        .map(|band| {
            let filtered = filtfilt_rows(&band_filter(band, fs)?, clean.view())?;
            config
                .phases
                .iter()
                .map(|&phase| {
                    let set = extract_epochs(filtered.view(), events, phase, fs, Some(*band));
                    let evaluation = evaluate_epochs(&set.epochs, &config.evaluation).map_err(|source| {
                        PipelineError::Evaluation { band: band.name.to_string(), phase, source }
                    })?;
                    Ok(BandPhaseResult {
                        band: *band,
                        phase,
                        evaluation,
                        rejected: set.rejected.iter().map(BoundaryError::to_string).collect(),
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    Ok(SessionDecoding { subject_id: recording.subject_id.clone(), results: per_band.into_iter().flatten().collect() })
}
