use graspdec_core::csp::fit_csp;
use graspdec_core::epoching::{epochs_by_class, extract_epochs};
use graspdec_core::model::{Band, EventKind, ObjectKind, Phase};
use graspdec_core::preprocess::{band_filter, filtfilt_rows, PreprocessConfig, Preprocessor};
use graspdec_core::simulate::{
    label_trials, resolve_ground_truth, run_protocol, session_samples, synthesize_eeg, synthesize_sources,
    validate_event_log, GroundTruthConfig, ObjectSchedule, ProtocolConfig,
};
use proptest::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

fn object_strategy() -> impl Strategy<Value = ObjectKind> {
    prop_oneof![Just(ObjectKind::PowerObject), Just(ObjectKind::PrecisionObject), Just(ObjectKind::NoObject)]
}

fn config_strategy() -> impl Strategy<Value = ProtocolConfig> {
    (
        1usize..6,
        1usize..12,
        0.5f64..6.0,
        0.5f64..10.0,
        0.2f64..60.0,
        0.1f64..5.0,
        prop_oneof![Just(ObjectSchedule::BalancedRandom), prop::collection::vec(object_strategy(), 1..5).prop_map(ObjectSchedule::Fixed)],
        prop_oneof![Just(250.0), Just(500.0), Just(128.0)],
        any::<u64>(),
    )
        .prop_map(|(n_blocks, trials_per_block, rotation_s, movement_s, rest, gap, schedule, fs, seed)| ProtocolConfig {
            n_blocks,
            trials_per_block,
            rotation_s,
            movement_s,
            rest_between_blocks_s: rest,
            inter_trial_s: gap,
            object_schedule: schedule,
            sample_rate_hz: fs,
            seed,
            ..ProtocolConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_config_satisfies_the_automaton(cfg in config_strategy()) {
        let events = run_protocol(&cfg).unwrap();
        prop_assert!(validate_event_log(&events).is_ok());
        let labels = label_trials(&events).unwrap();
        prop_assert_eq!(labels.len(), cfg.n_trials());
        let blocks = events.iter().filter(|e| e.kind == EventKind::BlockStart).count();
        prop_assert_eq!(blocks, cfg.n_blocks);
        let observation = (cfg.observation_s * cfg.sample_rate_hz).round() as usize;
        let starts = events.iter().filter(|e| e.kind == EventKind::ObservationStart);
        let cues = events.iter().filter(|e| e.kind == EventKind::AudioCue);
        for (s, c) in starts.zip(cues) {
            prop_assert_eq!(c.sample_index - s.sample_index, observation);
        }
        if cfg.object_schedule == ObjectSchedule::BalancedRandom {
            let count = |k| labels.iter().filter(|(_, o)| *o == k).count();
            let counts = [count(ObjectKind::PowerObject), count(ObjectKind::PrecisionObject), count(ObjectKind::NoObject)];
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn dropping_any_trial_event_is_caught(index in 0usize..62) {
        let cfg = ProtocolConfig { n_blocks: 1, trials_per_block: 10, ..Default::default() };
        let mut events = run_protocol(&cfg).unwrap();
        prop_assume!(events[index].kind.is_trial_event());
        events.remove(index);
        prop_assert!(validate_event_log(&events).is_err());
    }
}

#[test]
fn observation_window_is_500_samples_at_250_hz() {
    let events = run_protocol(&ProtocolConfig::default()).unwrap();
    let starts: Vec<usize> = events.iter().filter(|e| e.kind == EventKind::ObservationStart).map(|e| e.sample_index).collect();
    let cues: Vec<usize> = events.iter().filter(|e| e.kind == EventKind::AudioCue).map(|e| e.sample_index).collect();
    assert_eq!(starts.len(), 50);
    assert!(starts.iter().zip(&cues).all(|(s, c)| c - s == 500));
}

#[test]
fn session_bytes_depend_only_on_seed() {
    let cfg = ProtocolConfig { n_blocks: 2, trials_per_block: 4, seed: 77, ..Default::default() };
    let render = || {
        let events = run_protocol(&cfg).unwrap();
        let art = synthesize_eeg(&events, &GroundTruthConfig::planted_alpha(77, 4.0)).unwrap();
        serde_json::to_vec(&art).unwrap()
    };
    assert_eq!(render(), render());
}

/// Fraction of the signal's power between `lo` and `hi` Hz.
fn band_power_fraction(signal: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let n = buf.len();
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * fs / n as f64;
        let p = c.norm_sqr();
        total += p;
        if (lo..=hi).contains(&f) {
            inside += p;
        }
    }
    inside / total
}

#[test]
fn planted_alpha_source_sits_in_alpha() {
    let events = run_protocol(&ProtocolConfig::default()).unwrap();
    let truth = resolve_ground_truth(&GroundTruthConfig::planted_alpha(3, 4.0)).unwrap();
    let n = session_samples(&events, truth.sample_rate_hz);
    let sources = synthesize_sources(&events, &truth, n).unwrap();
    for name in ["occipital_alpha", "central_alpha"] {
        let j = truth.source_names.iter().position(|s| s == name).unwrap();
        let row = sources.row(j).to_vec();
        let fraction = band_power_fraction(&row, truth.sample_rate_hz, 8.0, 13.0);
        assert!(fraction >= 0.85, "{name}: {fraction:.3} of power in 8–13 Hz");
    }
}

#[test]
fn equal_multipliers_give_uninformative_csp() {
    let pre = Preprocessor::design(&PreprocessConfig::default(), 250.0).unwrap();
    let alpha = band_filter(&Band::Alpha.definition(), 250.0).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let events = run_protocol(&ProtocolConfig { seed, ..ProtocolConfig::fifty_per_object() }).unwrap();
        let art = synthesize_eeg(&events, &GroundTruthConfig::without_contrast(seed)).unwrap();
        let clean = pre.apply(art.recording.samples.view()).unwrap();
        let filtered = filtfilt_rows(&alpha, clean.view()).unwrap();
        let set = extract_epochs(filtered.view(), &events, Phase::Observation, 250.0, Some(Band::Alpha.definition()));
        let (power, precision) = epochs_by_class(&set.epochs);
        let model = fit_csp(&power, &precision).unwrap();
        worst = model.eigenvalues.iter().fold(worst, |w, l| w.max((l - 0.5).abs()));
    }
    assert!(worst <= 0.1, "largest |λ − 0.5| over 20 sessions: {worst:.3}");
}
