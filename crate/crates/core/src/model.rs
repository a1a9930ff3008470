//! Domain types shared by every stage: montage, recordings, protocol events,
//! frequency bands and the observation/movement phases.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Sample rate of the acquisition headset.
pub const STANDARD_SAMPLE_RATE_HZ: f64 = 250.0;

/// Channel labels in the fixed row order used by every matrix in the crate.
pub const CHANNEL_LABELS: [&str; 8] = ["Fz", "C3", "Cz", "C4", "Pz", "PO7", "Oz", "PO8"];

pub const N_CHANNELS: usize = CHANNEL_LABELS.len();

/// 10-20 placement of each channel as (polar angle from the vertex, azimuth
/// measured from the nasion towards the left ear), both in degrees.
const TEN_TWENTY_ANGLES: [(f64, f64); N_CHANNELS] = [
    (36.0, 0.0),    // Fz
    (36.0, 90.0),   // C3
    (0.0, 0.0),     // Cz
    (36.0, -90.0),  // C4
    (36.0, 180.0),  // Pz
    (72.0, 144.0),  // PO7
    (72.0, 180.0),  // Oz
    (72.0, -144.0), // PO8
];

/// Point on the unit head disc. `x` grows towards the right ear, `y` towards
/// the nose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn mirror_x(&self) -> Self {
        Self::new(-self.x, self.y)
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Azimuthal-equidistant projection of a spherical 10-20 angle pair: the
    /// vertex maps to the origin and a 90° polar angle to the unit circle.
    pub fn from_ten_twenty(polar_deg: f64, azimuth_deg: f64) -> Self {
        let r = polar_deg / 90.0;
        let az = azimuth_deg.to_radians();
        // positive azimuth rotates towards the left ear, i.e. negative x
        Self::new(-r * az.sin(), r * az.cos())
    }
}

/// The 8-electrode layout: labels in canonical order and their 2-D positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Montage {
    labels: Vec<String>,
    positions: Vec<Position>,
}

impl Montage {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Option<Position> {
        self.index_of(label).map(|i| self.positions[i])
    }

    /// True when labels match [`CHANNEL_LABELS`] in order and every position
    /// lies on the unit disc.
    pub fn is_standard(&self) -> bool {
        self.labels.len() == N_CHANNELS
            && self.labels.iter().zip(CHANNEL_LABELS).all(|(a, b)| a == b)
            && self.positions.iter().all(|p| p.radius() <= 1.0)
    }
}

/// The montage used for every recording.
pub fn standard_montage() -> Montage {
    Montage {
        labels: CHANNEL_LABELS.iter().map(|s| s.to_string()).collect(),
        positions: TEN_TWENTY_ANGLES
            .iter()
            .map(|&(polar, az)| Position::from_ten_twenty(polar, az))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(&self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    pub fn definition(&self) -> BandDefinition {
        let (low_hz, high_hz) = match self {
            Band::Delta => (0.0, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 13.0),
            Band::Beta => (13.0, 30.0),
            Band::Gamma => (30.0, 40.0),
        };
        BandDefinition { name: *self, low_hz, high_hz }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Band::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown band `{s}` (expected one of delta, theta, alpha, beta, gamma)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: Band,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandDefinition {
    /// Whether the band can be realised at `sample_rate_hz`.
    pub fn fits(&self, sample_rate_hz: f64) -> bool {
        self.low_hz >= 0.0 && self.high_hz > self.low_hz && self.high_hz <= sample_rate_hz / 2.0
    }
}

/// The five filter-bank bands, delta to gamma.
pub fn standard_bands() -> Vec<BandDefinition> {
    Band::ALL.iter().map(Band::definition).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Two seconds before the audio cue.
    Observation,
    /// Two seconds from the audio cue on.
    Movement,
}

impl Phase {
    pub const ALL: [Phase; 2] = [Phase::Observation, Phase::Movement];

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Observation => "observation",
            Phase::Movement => "movement",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown phase `{s}` (expected observation or movement)"))
    }
}

/// What the turntable presented on a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    /// Water bottle.
    PowerObject,
    /// Pen.
    PrecisionObject,
    NoObject,
}

impl ObjectKind {
    pub fn grasp_class(&self) -> Option<GraspClass> {
        match self {
            ObjectKind::PowerObject => Some(GraspClass::Power),
            ObjectKind::PrecisionObject => Some(GraspClass::Precision),
            ObjectKind::NoObject => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspClass {
    Power,
    Precision,
}

impl GraspClass {
    /// SVM label: Power is +1, Precision is -1.
    pub fn label(&self) -> f64 {
        match self {
            GraspClass::Power => 1.0,
            GraspClass::Precision => -1.0,
        }
    }

    pub fn from_label(label: f64) -> Self {
        if label >= 0.0 {
            GraspClass::Power
        } else {
            GraspClass::Precision
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RotationStart,
    GlassesOpaque,
    GlassesTransparent,
    ObservationStart,
    AudioCue,
    MovementEnd,
    BlockStart,
    BlockEnd,
    RestStart,
    RestEnd,
}

impl EventKind {
    pub fn is_trial_event(&self) -> bool {
        matches!(
            self,
            EventKind::RotationStart
                | EventKind::GlassesOpaque
                | EventKind::GlassesTransparent
                | EventKind::ObservationStart
                | EventKind::AudioCue
                | EventKind::MovementEnd
        )
    }
}

/// One sample-indexed protocol event. Block and rest events carry no trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub sample_index: usize,
    pub kind: EventKind,
    pub trial_id: Option<u32>,
    pub object: ObjectKind,
}

/// Events in emission order (non-decreasing sample index).
pub type EventLog = Vec<EventMarker>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub montage: Montage,
    /// µV, one row per channel in montage order.
    pub samples: Array2<f64>,
}

impl Recording {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    ChannelCount { expected: usize, found: usize },
    MontageMismatch { reason: String },
    SampleRate { sample_rate_hz: f64 },
    /// Permitted but not paper-conformant.
    NonStandardSampleRate { sample_rate_hz: f64 },
    NonFiniteSamples { channel: String, first_sample: usize, count: usize },
    EventOutOfRange { event_index: usize, sample_index: usize, n_samples: usize },
}

impl Violation {
    /// Warnings are reported but do not make a recording unusable.
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::NonStandardSampleRate { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChannelCount { expected, found } => {
                write!(f, "expected {expected} channels, found {found}")
            }
            Violation::MontageMismatch { reason } => write!(f, "montage mismatch: {reason}"),
            Violation::SampleRate { sample_rate_hz } => {
                write!(f, "sample rate must be positive and finite, got {sample_rate_hz}")
            }
            Violation::NonStandardSampleRate { sample_rate_hz } => {
                write!(f, "warning: sample rate {sample_rate_hz} Hz differs from {STANDARD_SAMPLE_RATE_HZ} Hz")
            }
            Violation::NonFiniteSamples { channel, first_sample, count } => write!(
                f,
                "channel {channel}: non-finite value at sample {first_sample} ({count} non-finite samples in total)"
            ),
            Violation::EventOutOfRange { event_index, sample_index, n_samples } => write!(
                f,
                "event #{event_index} at sample {sample_index} lies beyond the recording ({n_samples} samples)"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.violations.iter().any(|v| !v.is_warning())
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.is_warning())
    }
}

/// Reports every violated [`Recording`] invariant.
pub fn validate_recording(rec: &Recording) -> ValidationReport {
    let mut violations = Vec::new();

    if rec.n_channels() != N_CHANNELS {
        violations.push(Violation::ChannelCount { expected: N_CHANNELS, found: rec.n_channels() });
    }
    if !rec.montage.is_standard() {
        violations.push(Violation::MontageMismatch {
            reason: format!("labels {:?} are not the standard 8-channel layout", rec.montage.labels()),
        });
    } else if rec.montage.len() != rec.n_channels() {
        violations.push(Violation::MontageMismatch {
            reason: format!("montage has {} labels but data has {} rows", rec.montage.len(), rec.n_channels()),
        });
    }

    if !(rec.sample_rate_hz.is_finite() && rec.sample_rate_hz > 0.0) {
        violations.push(Violation::SampleRate { sample_rate_hz: rec.sample_rate_hz });
    } else if rec.sample_rate_hz != STANDARD_SAMPLE_RATE_HZ {
        violations.push(Violation::NonStandardSampleRate { sample_rate_hz: rec.sample_rate_hz });
    }

    for (ch, row) in rec.samples.rows().into_iter().enumerate() {
        let mut bad = row.iter().enumerate().filter(|(_, v)| !v.is_finite());
        if let Some((first_sample, _)) = bad.next() {
            let channel = rec
                .montage
                .labels()
                .get(ch)
                .cloned()
                .unwrap_or_else(|| format!("#{ch}"));
            violations.push(Violation::NonFiniteSamples { channel, first_sample, count: 1 + bad.count() });
        }
    }

    ValidationReport { violations }
}

/// Checks that every event lies inside a recording of `n_samples`.
pub fn validate_events(events: &[EventMarker], n_samples: usize) -> ValidationReport {
    let violations = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.sample_index >= n_samples)
        .map(|(event_index, e)| Violation::EventOutOfRange {
            event_index,
            sample_index: e.sample_index,
            n_samples,
        })
        .collect();
    ValidationReport { violations }
}
