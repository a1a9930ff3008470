//! Cue-aligned two-second windows cut from continuous (band-filtered)
//! signals. Observation covers `[cue − 2 s, cue)`, movement `[cue, cue + 2 s)`.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::model::{BandDefinition, EventKind, EventMarker, GraspClass, Phase};

pub const WINDOW_S: f64 = 2.0;

pub fn window_len(sample_rate_hz: f64) -> usize {
    (WINDOW_S * sample_rate_hz).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub trial_id: u32,
    pub phase: Phase,
    pub grasp_class: GraspClass,
    pub band: Option<BandDefinition>,
    /// µV, channels × window samples.
    pub data: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trial {trial_id}: {phase} window [{start}, {end}) exceeds the recording ({n_samples} samples)")]
pub struct BoundaryError {
    pub trial_id: u32,
    pub phase: Phase,
    pub start: i64,
    pub end: i64,
    pub n_samples: usize,
}

/// Extracted epochs plus the trials that could not be cut.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochSet {
    pub epochs: Vec<Epoch>,
    pub rejected: Vec<BoundaryError>,
}

/// Sample range of a phase window relative to a cue.
pub fn window_bounds(cue: usize, phase: Phase, sample_rate_hz: f64) -> (i64, i64) {
    let len = window_len(sample_rate_hz) as i64;
    let cue = cue as i64;
    match phase {
        Phase::Observation => (cue - len, cue),
        Phase::Movement => (cue, cue + len),
    }
}

/// One epoch per power/precision trial, ordered by trial id. No-object
/// trials are skipped.
pub fn extract_epochs(
    signals: ArrayView2<'_, f64>,
    events: &[EventMarker],
    phase: Phase,
    sample_rate_hz: f64,
    band: Option<BandDefinition>,
) -> EpochSet {
    let n_samples = signals.ncols();
    let mut cues: Vec<(u32, GraspClass, usize)> = events
        .iter()
        .filter(|e| e.kind == EventKind::AudioCue)
        .filter_map(|e| Some((e.trial_id?, e.object.grasp_class()?, e.sample_index)))
        .collect();
    cues.sort_by_key(|c| c.0);

    let mut set = EpochSet::default();
    for (trial_id, grasp_class, cue) in cues {
        let (start, end) = window_bounds(cue, phase, sample_rate_hz);
        if start < 0 || end > n_samples as i64 {
            set.rejected.push(BoundaryError { trial_id, phase, start, end, n_samples });
            continue;
        }
        set.epochs.push(Epoch {
            trial_id,
            phase,
            grasp_class,
            band,
            data: signals.slice(s![.., start as usize..end as usize]).to_owned(),
        });
    }
    set
}

/// Stable partition into (power, precision).
pub fn epochs_by_class(epochs: &[Epoch]) -> (Vec<Epoch>, Vec<Epoch>) {
    epochs.iter().cloned().partition(|e| e.grasp_class == GraspClass::Power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjectKind;

    fn cue(trial: u32, object: ObjectKind, at: usize) -> EventMarker {
        EventMarker { sample_index: at, kind: EventKind::AudioCue, trial_id: Some(trial), object }
    }

    fn ramp(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((8, n), |(c, t)| (c * 100_000 + t) as f64)
    }

    #[test]
    fn observation_window_ends_at_cue() {
        let x = ramp(10_000);
        let set = extract_epochs(x.view(), &[cue(0, ObjectKind::PowerObject, 5000)], Phase::Observation, 250.0, None);
        let e = &set.epochs[0];
        assert_eq!(e.data.ncols(), 500);
        assert_eq!(e.data[[0, 0]], 4500.0);
        assert_eq!(e.data[[0, 499]], 4999.0);
        assert_eq!(e.grasp_class, GraspClass::Power);
    }

    #[test]
    fn windows_abut_at_cue_without_overlap() {
        let x = ramp(10_000);
        let ev = [cue(3, ObjectKind::PrecisionObject, 5000)];
        let obs = extract_epochs(x.view(), &ev, Phase::Observation, 250.0, None);
        let mov = extract_epochs(x.view(), &ev, Phase::Movement, 250.0, None);
        assert_eq!(obs.epochs[0].data[[2, 499]] + 1.0, mov.epochs[0].data[[2, 0]]);
        assert_eq!(mov.epochs[0].data[[0, 0]], 5000.0);
    }

    #[test]
    fn boundary_trials_are_reported_and_others_kept() {
        let x = ramp(6000);
        let ev = [
            cue(0, ObjectKind::PowerObject, 100),
            cue(1, ObjectKind::PrecisionObject, 3000),
            cue(2, ObjectKind::NoObject, 3000),
            cue(3, ObjectKind::PowerObject, 5800),
        ];
        let obs = extract_epochs(x.view(), &ev, Phase::Observation, 250.0, None);
        assert_eq!(obs.epochs.iter().map(|e| e.trial_id).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(obs.rejected.len(), 1);
        assert_eq!(obs.rejected[0].trial_id, 0);
        let mov = extract_epochs(x.view(), &ev, Phase::Movement, 250.0, None);
        assert_eq!(mov.epochs.iter().map(|e| e.trial_id).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(mov.rejected[0].trial_id, 3);
    }

    #[test]
    fn output_is_ordered_by_trial_id() {
        let x = ramp(20_000);
        let ev = [cue(5, ObjectKind::PowerObject, 9000), cue(2, ObjectKind::PowerObject, 3000)];
        let set = extract_epochs(x.view(), &ev, Phase::Movement, 250.0, None);
        assert_eq!(set.epochs.iter().map(|e| e.trial_id).collect::<Vec<_>>(), vec![2, 5]);
    }

    #[test]
    fn partition_by_class() {
        let x = ramp(60_000);
        let ev: Vec<_> = (0..100)
            .map(|i| {
                let obj = if i % 2 == 0 { ObjectKind::PowerObject } else { ObjectKind::PrecisionObject };
                cue(i, obj, 600 + 500 * i as usize)
            })
            .collect();
        let set = extract_epochs(x.view(), &ev, Phase::Observation, 250.0, None);
        assert_eq!(set.epochs.len(), 100);
        let (p, q) = epochs_by_class(&set.epochs);
        assert_eq!((p.len(), q.len()), (50, 50));
        assert!(p.windows(2).all(|w| w[0].trial_id < w[1].trial_id));

        let (p, q) = epochs_by_class(&[]);
        assert!(p.is_empty() && q.is_empty());
        let (p, q) = epochs_by_class(&set.epochs[..1]);
        assert_eq!((p.len(), q.len()), (1, 0));
    }
}
