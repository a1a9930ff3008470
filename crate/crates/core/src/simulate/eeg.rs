use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::protocol::{session_samples, validate_event_log, ProtocolError};
use crate::epoching::window_bounds;
use crate::model::{
    standard_montage, Band, EventKind, EventLog, EventMarker, GraspClass, Phase, Recording, STANDARD_SAMPLE_RATE_HZ,
};
use crate::preprocess::{band_filter, filtfilt, FilterError};
use crate::rng::{substream, StreamRng, MIXING, NOISE, SOURCES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingSpec {
    /// One weight per montage channel.
    Explicit(Vec<f64>),
    /// Gaussian fall-off `exp(−d²/2w²)` around an electrode.
    Focal { electrode: String, width: f64 },
    /// Standard-normal weights from the mixing stream.
    Random,
}

/// Band-power multiplier of one source in one phase window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub phase: Phase,
    pub power: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub band: Band,
    /// RMS amplitude before modulation, µV.
    pub amplitude_uv: f64,
    pub mixing: MixingSpec,
    #[serde(default)]
    pub modulation: Vec<Modulation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthConfig {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub sources: Vec<SourceSpec>,
    pub noise_sigma_uv: f64,
    pub seed: u64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self::planted_alpha(0, 4.0)
    }
}

const BACKGROUND_BANDS: [Band; 6] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma, Band::Theta];

impl GroundTruthConfig {
    /// Occipital alpha carrying a `contrast`:1 power→precision ratio during
    /// observation, central alpha carrying the same ratio during movement,
    /// and six randomly mixed background sources.
    pub fn planted_alpha(seed: u64, contrast: f64) -> Self {
        let mut sources = vec![
            SourceSpec {
                name: "occipital_alpha".into(),
                band: Band::Alpha,
                amplitude_uv: 10.0,
                mixing: MixingSpec::Focal { electrode: "Oz".into(), width: 0.35 },
                modulation: vec![Modulation { phase: Phase::Observation, power: contrast, precision: 1.0 }],
            },
            SourceSpec {
                name: "central_alpha".into(),
                band: Band::Alpha,
                amplitude_uv: 10.0,
                mixing: MixingSpec::Focal { electrode: "Cz".into(), width: 0.35 },
                modulation: vec![Modulation { phase: Phase::Movement, power: contrast, precision: 1.0 }],
            },
        ];
        sources.extend(BACKGROUND_BANDS.iter().enumerate().map(|(i, &band)| SourceSpec {
            name: format!("background_{}", i + 1),
            band,
            amplitude_uv: 5.0,
            mixing: MixingSpec::Random,
            modulation: vec![],
        }));
        Self {
            subject_id: "sim".into(),
            sample_rate_hz: STANDARD_SAMPLE_RATE_HZ,
            sources,
            noise_sigma_uv: 1.0,
            seed,
        }
    }

    /// Same sources as [`planted_alpha`](Self::planted_alpha) with no class
    /// difference anywhere.
    pub fn without_contrast(seed: u64) -> Self {
        Self::planted_alpha(seed, 1.0)
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate {} Hz", self.sample_rate_hz));
        }
        if self.sources.is_empty() {
            return bad("no sources".into());
        }
        if !(self.noise_sigma_uv.is_finite() && self.noise_sigma_uv >= 0.0) {
            return bad(format!("noise sigma {}", self.noise_sigma_uv));
        }
        let montage = standard_montage();
        for s in &self.sources {
            if !(s.amplitude_uv.is_finite() && s.amplitude_uv > 0.0) {
                return bad(format!("source {}: amplitude {}", s.name, s.amplitude_uv));
            }
            if !s.band.definition().fits(self.sample_rate_hz) {
                return bad(format!("source {}: band {} does not fit below Nyquist", s.name, s.band));
            }
            match &s.mixing {
                MixingSpec::Explicit(w) if w.len() != montage.len() || w.iter().any(|v| !v.is_finite()) => {
                    return bad(format!("source {}: mixing column needs {} finite weights", s.name, montage.len()));
                }
                MixingSpec::Focal { electrode, width } => {
                    if montage.index_of(electrode).is_none() {
                        return bad(format!("source {}: unknown electrode {electrode}", s.name));
                    }
                    if !(width.is_finite() && *width > 0.0) {
                        return bad(format!("source {}: width {width}", s.name));
                    }
                }
                _ => {}
            }
            for (i, m) in s.modulation.iter().enumerate() {
                if !(m.power.is_finite() && m.power > 0.0 && m.precision.is_finite() && m.precision > 0.0) {
                    return bad(format!("source {}: multipliers must be positive", s.name));
                }
                if s.modulation[..i].iter().any(|o| o.phase == m.phase) {
                    return bad(format!("source {}: {} modulated twice", s.name, m.phase));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub grasp_class: GraspClass,
    pub phase: Phase,
    pub value: f64,
}

/// Everything needed to regenerate a session and to check what a decoder
/// should find.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub source_names: Vec<String>,
    pub source_bands: Vec<Band>,
    pub amplitudes_uv: Vec<f64>,
    /// Channels × sources, as rows.
    pub mixing_matrix: Vec<Vec<f64>>,
    /// Per source, the multiplier of every (class, phase) pair.
    pub multipliers: Vec<Vec<Multiplier>>,
    pub noise_sigma_uv: f64,
    /// Seed of each source's white-noise generator.
    pub source_seeds: Vec<u64>,
}

impl GroundTruth {
    pub fn n_sources(&self) -> usize {
        self.source_names.len()
    }

    pub fn mixing_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.source_names.iter().position(|n| n == name)?;
        Some(self.mixing_matrix.iter().map(|row| row[j]).collect())
    }

    pub fn multiplier(&self, source: usize, grasp_class: GraspClass, phase: Phase) -> f64 {
        self.multipliers[source]
            .iter()
            .find(|m| m.grasp_class == grasp_class && m.phase == phase)
            .map_or(1.0, |m| m.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionArtifacts {
    pub recording: Recording,
    pub events: EventLog,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("mixing matrix has rank {rank} for {sources} sources")]
    RankDeficient { rank: usize, sources: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Resolves the random parts of `config` into a concrete ground truth.
pub fn resolve_ground_truth(config: &GroundTruthConfig) -> Result<GroundTruth, SimulationError> {
    config.validate()?;
    let montage = standard_montage();
    let mut mixing_rng = substream(config.seed, MIXING);
    let columns: Vec<Vec<f64>> = config
        .sources
        .iter()
        .map(|s| match &s.mixing {
            MixingSpec::Explicit(w) => w.clone(),
            MixingSpec::Focal { electrode, width } => {
                let centre = montage.position(electrode).expect("validated");
                montage
                    .positions()
                    .iter()
                    .map(|p| (-p.distance(&centre).powi(2) / (2.0 * width * width)).exp())
                    .collect()
            }
            MixingSpec::Random => (0..montage.len()).map(|_| mixing_rng.sample(StandardNormal)).collect(),
        })
        .collect();

    let n_sources = columns.len();
    let a = DMatrix::from_fn(montage.len(), n_sources, |i, j| columns[j][i]);
    let sv = a.singular_values();
    let max_sv = sv.max();
    let rank = sv.iter().filter(|&&s| s > max_sv * 1e-10).count();
    if rank < n_sources {
        return Err(SimulationError::RankDeficient { rank, sources: n_sources });
    }

    let mut source_rng = substream(config.seed, SOURCES);
    let source_seeds = (0..n_sources).map(|_| source_rng.random()).collect();
    let multipliers = config
        .sources
        .iter()
        .map(|s| {
            s.modulation
                .iter()
                .flat_map(|m| {
                    [
                        Multiplier { grasp_class: GraspClass::Power, phase: m.phase, value: m.power },
                        Multiplier { grasp_class: GraspClass::Precision, phase: m.phase, value: m.precision },
                    ]
                })
                .collect()
        })
        .collect();

    Ok(GroundTruth {
        seed: config.seed,
        sample_rate_hz: config.sample_rate_hz,
        source_names: config.sources.iter().map(|s| s.name.clone()).collect(),
        source_bands: config.sources.iter().map(|s| s.band).collect(),
        amplitudes_uv: config.sources.iter().map(|s| s.amplitude_uv).collect(),
        mixing_matrix: (0..montage.len()).map(|i| a.row(i).iter().copied().collect()).collect(),
        multipliers,
        noise_sigma_uv: config.noise_sigma_uv,
        source_seeds,
    })
}

/// Sample ranges in which a phase's multiplier applies: observation is the
/// two seconds before the cue, movement runs from the cue to the end of the
/// movement period.
fn phase_windows(events: &[EventMarker], sample_rate_hz: f64) -> Vec<(GraspClass, Phase, usize, usize)> {
    let mut windows = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.kind != EventKind::AudioCue {
            continue;
        }
        let Some(class) = e.object.grasp_class() else { continue };
        let (start, end) = window_bounds(e.sample_index, Phase::Observation, sample_rate_hz);
        windows.push((class, Phase::Observation, start.max(0) as usize, end as usize));
        let movement_end = events[i..]
            .iter()
            .find(|m| m.kind == EventKind::MovementEnd && m.trial_id == e.trial_id)
            .map_or(e.sample_index, |m| m.sample_index);
        windows.push((class, Phase::Movement, e.sample_index, movement_end));
    }
    windows
}

/// Source time courses (sources × samples) for `events`, with class and
/// phase modulation applied.
pub fn synthesize_sources(
    events: &[EventMarker],
    truth: &GroundTruth,
    n_samples: usize,
) -> Result<Array2<f64>, SimulationError> {
    let fs = truth.sample_rate_hz;
    let windows = phase_windows(events, fs);
    let mut sources = Array2::zeros((truth.n_sources(), n_samples));
    for j in 0..truth.n_sources() {
        let mut rng = StreamRng::seed_from_u64(truth.source_seeds[j]);
        let white: Vec<f64> = (0..n_samples).map(|_| rng.sample(StandardNormal)).collect();
        let filter = band_filter(&truth.source_bands[j].definition(), fs)?;
        let mut s = Array1::from(filtfilt(&filter, &white)?);
        let rms = (s.iter().map(|v| v * v).sum::<f64>() / n_samples as f64).sqrt();
        s *= truth.amplitudes_uv[j] / rms;
        for &(class, phase, start, end) in &windows {
            let gain = truth.multiplier(j, class, phase).sqrt();
            if gain != 1.0 {
                s.slice_mut(ndarray::s![start..end.min(n_samples)]).mapv_inplace(|v| v * gain);
            }
        }
        sources.row_mut(j).assign(&s);
    }
    Ok(sources)
}

/// `X = A·S + noise` over the span of `events`.
pub fn synthesize_eeg(events: &[EventMarker], config: &GroundTruthConfig) -> Result<SessionArtifacts, SimulationError> {
    validate_event_log(events)?;
    let truth = resolve_ground_truth(config)?;
    let n_samples = session_samples(events, truth.sample_rate_hz);
    let sources = synthesize_sources(events, &truth, n_samples)?;
    let montage = standard_montage();
    let mixing = Array2::from_shape_fn((montage.len(), truth.n_sources()), |(i, j)| truth.mixing_matrix[i][j]);
    let mut samples = mixing.dot(&sources);
    if truth.noise_sigma_uv > 0.0 {
        let mut rng = substream(truth.seed, NOISE);
        for v in samples.iter_mut() {
            *v += truth.noise_sigma_uv * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(SessionArtifacts {
        recording: Recording {
            subject_id: config.subject_id.clone(),
            sample_rate_hz: truth.sample_rate_hz,
            montage,
            samples,
        },
        events: events.to_vec(),
        ground_truth: truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{run_protocol, ProtocolConfig};

    fn short_protocol() -> EventLog {
        run_protocol(&ProtocolConfig { n_blocks: 1, trials_per_block: 3, ..Default::default() }).unwrap()
    }

    #[test]
    fn rank_one_mixing_copies_the_source() {
        let cfg = GroundTruthConfig {
            sources: vec![SourceSpec {
                name: "s".into(),
                band: Band::Alpha,
                amplitude_uv: 3.0,
                mixing: MixingSpec::Explicit(vec![1.0; 8]),
                modulation: vec![],
            }],
            noise_sigma_uv: 0.0,
            ..GroundTruthConfig::default()
        };
        let art = synthesize_eeg(&short_protocol(), &cfg).unwrap();
        let x = &art.recording.samples;
        for ch in 1..8 {
            assert_eq!(x.row(ch), x.row(0));
        }
        assert!(x.row(0).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let col = MixingSpec::Explicit(vec![1.0; 8]);
        let mut cfg = GroundTruthConfig::default();
        cfg.sources.truncate(2);
        cfg.sources[0].mixing = col.clone();
        cfg.sources[1].mixing = col;
        assert_eq!(
            resolve_ground_truth(&cfg),
            Err(SimulationError::RankDeficient { rank: 1, sources: 2 })
        );
    }

    #[test]
    fn bad_configs() {
        let mut cfg = GroundTruthConfig::default();
        cfg.sources[0].modulation[0].power = 0.0;
        assert!(matches!(cfg.validate(), Err(SimulationError::InvalidConfig(_))));
        let mut cfg = GroundTruthConfig::default();
        cfg.sources[0].mixing = MixingSpec::Focal { electrode: "T7".into(), width: 0.3 };
        assert!(matches!(cfg.validate(), Err(SimulationError::InvalidConfig(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let ev = short_protocol();
        let a = synthesize_eeg(&ev, &GroundTruthConfig::planted_alpha(5, 4.0)).unwrap();
        let b = synthesize_eeg(&ev, &GroundTruthConfig::planted_alpha(5, 4.0)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_eeg(&ev, &GroundTruthConfig::planted_alpha(6, 4.0)).unwrap();
        assert_ne!(a.recording.samples, c.recording.samples);
    }

    #[test]
    fn modulation_raises_window_power() {
        let cfg = ProtocolConfig {
            n_blocks: 1,
            trials_per_block: 3,
            object_schedule: crate::simulate::ObjectSchedule::Fixed(vec![crate::model::ObjectKind::PowerObject]),
            ..Default::default()
        };
        let ev = run_protocol(&cfg).unwrap();
        let truth = resolve_ground_truth(&GroundTruthConfig::planted_alpha(1, 9.0)).unwrap();
        let s = synthesize_sources(&ev, &truth, session_samples(&ev, 250.0)).unwrap();
        let cue = ev.iter().find(|e| e.kind == EventKind::AudioCue).unwrap().sample_index;
        let power = |a: usize, b: usize| s.row(0).slice(ndarray::s![a..b]).iter().map(|v| v * v).sum::<f64>();
        // 9× power inside the observation window vs the rotation before it
        assert!(power(cue - 500, cue) > 3.0 * power(cue - 1250, cue - 750));
    }
}
