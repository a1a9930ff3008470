use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::{EventKind, EventMarker, EventLog, ObjectKind, STANDARD_SAMPLE_RATE_HZ};
use crate::rng::{substream, SCHEDULING};

/// Quiet time before the first block and after the last one.
pub const LEAD_IN_S: f64 = 5.0;
pub const TAIL_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSchedule {
    /// Equal counts per object (±1 when the trial count is not a multiple
    /// of three), in seeded random order.
    BalancedRandom,
    /// The listed objects in order, cycled if shorter than the session.
    Fixed(Vec<ObjectKind>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_blocks: usize,
    pub trials_per_block: usize,
    pub observation_s: f64,
    pub movement_s: f64,
    pub rotation_s: f64,
    pub rest_between_blocks_s: f64,
    pub inter_trial_s: f64,
    pub object_schedule: ObjectSchedule,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n_blocks: 5,
            trials_per_block: 10,
            observation_s: 2.0,
            movement_s: 4.0,
            rotation_s: 3.0,
            rest_between_blocks_s: 30.0,
            inter_trial_s: 2.0,
            object_schedule: ObjectSchedule::BalancedRandom,
            sample_rate_hz: STANDARD_SAMPLE_RATE_HZ,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    /// 15 blocks of 10, i.e. 50 trials of each object.
    pub fn fifty_per_object() -> Self {
        Self { n_blocks: 15, ..Self::default() }
    }

    pub fn n_trials(&self) -> usize {
        self.n_blocks * self.trials_per_block
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidConfig(msg));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate {} Hz", self.sample_rate_hz));
        }
        if self.n_blocks == 0 || self.trials_per_block == 0 {
            return bad("at least one block with one trial is required".into());
        }
        for (name, value) in [
            ("observation_s", self.observation_s),
            ("movement_s", self.movement_s),
            ("rotation_s", self.rotation_s),
            ("rest_between_blocks_s", self.rest_between_blocks_s),
            ("inter_trial_s", self.inter_trial_s),
        ] {
            if !(value.is_finite() && value > 0.0) || to_samples(value, self.sample_rate_hz) == 0 {
                return bad(format!("{name} = {value} must be a positive duration of at least one sample"));
            }
        }
        if let ObjectSchedule::Fixed(list) = &self.object_schedule {
            if list.is_empty() {
                return bad("fixed object schedule is empty".into());
            }
        }
        Ok(())
    }
}

fn to_samples(seconds: f64, sample_rate_hz: f64) -> usize {
    (seconds * sample_rate_hz).round() as usize
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error("event {index} ({kind:?} at sample {sample_index}): {reason}")]
    Malformed { index: usize, kind: EventKind, sample_index: usize, reason: String },
    #[error("event log ends inside a {0}")]
    Truncated(&'static str),
}

fn schedule(config: &ProtocolConfig) -> Vec<ObjectKind> {
    let n = config.n_trials();
    match &config.object_schedule {
        ObjectSchedule::Fixed(list) => list.iter().copied().cycle().take(n).collect(),
        ObjectSchedule::BalancedRandom => {
            let mut rng = substream(config.seed, SCHEDULING);
            let mut kinds = [ObjectKind::PowerObject, ObjectKind::PrecisionObject, ObjectKind::NoObject];
            kinds.shuffle(&mut rng);
            let mut objects: Vec<ObjectKind> = (0..n).map(|i| kinds[i % 3]).collect();
            objects.shuffle(&mut rng);
            objects
        }
    }
}

/// Event log of one simulated session.
pub fn run_protocol(config: &ProtocolConfig) -> Result<EventLog, ProtocolError> {
    config.validate()?;
    let fs = config.sample_rate_hz;
    let rotation = to_samples(config.rotation_s, fs);
    let observation = to_samples(config.observation_s, fs);
    let movement = to_samples(config.movement_s, fs);
    let inter_trial = to_samples(config.inter_trial_s, fs);
    let rest = to_samples(config.rest_between_blocks_s, fs);

    let objects = schedule(config);
    let mut events = Vec::with_capacity(config.n_trials() * 6 + config.n_blocks * 4);
    let mut push = |sample_index, kind, trial_id, object| {
        events.push(EventMarker { sample_index, kind, trial_id, object });
    };
    let mut t = to_samples(LEAD_IN_S, fs);
    let mut trial = 0u32;
    for block in 0..config.n_blocks {
        if block > 0 {
            push(t, EventKind::RestStart, None, ObjectKind::NoObject);
            t += rest;
            push(t, EventKind::RestEnd, None, ObjectKind::NoObject);
        }
        push(t, EventKind::BlockStart, None, ObjectKind::NoObject);
        for k in 0..config.trials_per_block {
            if k > 0 {
                t += inter_trial;
            }
            let object = objects[trial as usize];
            let id = Some(trial);
            push(t, EventKind::RotationStart, id, object);
            push(t, EventKind::GlassesOpaque, id, object);
            t += rotation;
            push(t, EventKind::GlassesTransparent, id, object);
            push(t, EventKind::ObservationStart, id, object);
            t += observation;
            push(t, EventKind::AudioCue, id, object);
            t += movement;
            push(t, EventKind::MovementEnd, id, object);
            trial += 1;
        }
        push(t, EventKind::BlockEnd, None, ObjectKind::NoObject);
    }
    Ok(events)
}

/// Recording length that covers `events` plus the closing tail.
pub fn session_samples(events: &[EventMarker], sample_rate_hz: f64) -> usize {
    let last = events.iter().map(|e| e.sample_index).max().unwrap_or(0);
    last + to_samples(TAIL_S, sample_rate_hz) + 1
}

const TRIAL_SEQUENCE: [EventKind; 6] = [
    EventKind::RotationStart,
    EventKind::GlassesOpaque,
    EventKind::GlassesTransparent,
    EventKind::ObservationStart,
    EventKind::AudioCue,
    EventKind::MovementEnd,
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Idle,
    Resting,
    InBlock,
    /// Index into `TRIAL_SEQUENCE` of the next expected event.
    InTrial { next: usize, trial_id: u32, object: ObjectKind },
}

/// Checks `events` against the protocol grammar
/// `(BlockStart Trial* BlockEnd (RestStart RestEnd)?)*` where every trial is
/// the six trial events in order, sharing one trial id and object. Sample
/// indices must not decrease and trial ids must increase.
pub fn validate_event_log(events: &[EventMarker]) -> Result<(), ProtocolError> {
    let mut state = State::Idle;
    let mut last_sample = 0;
    let mut last_trial: Option<u32> = None;
    for (index, e) in events.iter().enumerate() {
        let fail = |reason: String| ProtocolError::Malformed {
            index,
            kind: e.kind,
            sample_index: e.sample_index,
            reason,
        };
        if e.sample_index < last_sample {
            return Err(fail(format!("sample index goes back from {last_sample}")));
        }
        last_sample = e.sample_index;
        if e.kind.is_trial_event() != e.trial_id.is_some() {
            return Err(fail("trial id present on a non-trial event or missing on a trial event".into()));
        }
        state = match (state, e.kind) {
            (State::Idle, EventKind::BlockStart) => State::InBlock,
            (State::Idle, EventKind::RestStart) if index > 0 => State::Resting,
            (State::Resting, EventKind::RestEnd) => State::Idle,
            (State::InBlock, EventKind::BlockEnd) => State::Idle,
            (State::InBlock, EventKind::RotationStart) => {
                let id = e.trial_id.expect("checked above");
                if last_trial.is_some_and(|prev| id <= prev) {
                    return Err(fail(format!("trial id {id} does not follow {}", last_trial.unwrap())));
                }
                last_trial = Some(id);
                State::InTrial { next: 1, trial_id: id, object: e.object }
            }
            (State::InTrial { next, trial_id, object }, kind) if kind == TRIAL_SEQUENCE[next] => {
                if e.trial_id != Some(trial_id) || e.object != object {
                    return Err(fail(format!("does not match trial {trial_id} ({object:?})")));
                }
                if next + 1 == TRIAL_SEQUENCE.len() {
                    State::InBlock
                } else {
                    State::InTrial { next: next + 1, trial_id, object }
                }
            }
            (State::InTrial { next, .. }, _) => {
                return Err(fail(format!("expected {:?}", TRIAL_SEQUENCE[next])));
            }
            (s, _) => return Err(fail(format!("unexpected in state {s:?}"))),
        };
    }
    match state {
        State::Idle => Ok(()),
        State::Resting => Err(ProtocolError::Truncated("rest")),
        State::InBlock => Err(ProtocolError::Truncated("block")),
        State::InTrial { .. } => Err(ProtocolError::Truncated("trial")),
    }
}

/// `(trial_id, object)` for each trial, read from the audio cues.
pub fn label_trials(events: &[EventMarker]) -> Result<Vec<(u32, ObjectKind)>, ProtocolError> {
    validate_event_log(events)?;
    Ok(events
        .iter()
        .filter(|e| e.kind == EventKind::AudioCue)
        .map(|e| (e.trial_id.expect("validated"), e.object))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_session_shape() {
        let events = run_protocol(&ProtocolConfig::default()).unwrap();
        let count = |k| events.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EventKind::BlockStart), 5);
        assert_eq!(count(EventKind::BlockEnd), 5);
        assert_eq!(count(EventKind::AudioCue), 50);
        assert_eq!(count(EventKind::RestStart), 4);
        validate_event_log(&events).unwrap();
    }

    #[test]
    fn observation_is_500_samples() {
        let events = run_protocol(&ProtocolConfig::default()).unwrap();
        let starts: Vec<usize> =
            events.iter().filter(|e| e.kind == EventKind::ObservationStart).map(|e| e.sample_index).collect();
        let cues: Vec<usize> = events.iter().filter(|e| e.kind == EventKind::AudioCue).map(|e| e.sample_index).collect();
        assert!(starts.iter().zip(&cues).all(|(s, c)| c - s == 500));
    }

    #[test]
    fn balanced_counts() {
        for seed in 0..5 {
            let labels = label_trials(&run_protocol(&ProtocolConfig { seed, ..Default::default() }).unwrap()).unwrap();
            let mut counts = [0usize; 3];
            for (_, o) in &labels {
                counts[*o as usize] += 1;
            }
            assert_eq!(counts.iter().sum::<usize>(), 50);
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        let labels = label_trials(&run_protocol(&ProtocolConfig::fifty_per_object()).unwrap()).unwrap();
        assert_eq!(labels.iter().filter(|(_, o)| *o == ObjectKind::PowerObject).count(), 50);
    }

    #[test]
    fn fixed_schedule_is_followed() {
        let list = vec![ObjectKind::PowerObject, ObjectKind::PrecisionObject, ObjectKind::NoObject];
        let cfg = ProtocolConfig {
            n_blocks: 1,
            trials_per_block: 3,
            object_schedule: ObjectSchedule::Fixed(list.clone()),
            ..Default::default()
        };
        let labels = label_trials(&run_protocol(&cfg).unwrap()).unwrap();
        assert_eq!(labels.into_iter().map(|(_, o)| o).collect::<Vec<_>>(), list);
    }

    #[test]
    fn empty_log_has_no_trials() {
        assert_eq!(label_trials(&[]).unwrap(), vec![]);
    }

    #[test]
    fn malformed_log_names_event() {
        let mut events = run_protocol(&ProtocolConfig::default()).unwrap();
        let cue = events.iter().position(|e| e.kind == EventKind::AudioCue).unwrap();
        events.remove(cue);
        match label_trials(&events) {
            Err(ProtocolError::Malformed { index, kind, .. }) => {
                assert_eq!(index, cue);
                assert_eq!(kind, EventKind::MovementEnd);
            }
            other => panic!("{other:?}"),
        }
        let truncated = &run_protocol(&ProtocolConfig::default()).unwrap()[..3];
        assert_eq!(validate_event_log(truncated), Err(ProtocolError::Truncated("trial")));
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = ProtocolConfig { seed: 42, ..Default::default() };
        assert_eq!(run_protocol(&cfg).unwrap(), run_protocol(&cfg).unwrap());
        assert_ne!(
            run_protocol(&cfg).unwrap(),
            run_protocol(&ProtocolConfig { seed: 43, ..Default::default() }).unwrap()
        );
    }
}
