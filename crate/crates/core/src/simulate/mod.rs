//! Seeded simulator of the grasp paradigm: the protocol's event log and
//! synthetic EEG with planted class-dependent band power.

mod eeg;
mod protocol;

pub use eeg::{
    resolve_ground_truth, synthesize_eeg, synthesize_sources, GroundTruth, GroundTruthConfig, MixingSpec, Modulation,
    Multiplier, SessionArtifacts, SimulationError, SourceSpec,
};
pub use protocol::{
    label_trials, run_protocol, session_samples, validate_event_log, ObjectSchedule, ProtocolConfig, ProtocolError,
    LEAD_IN_S, TAIL_S,
};
