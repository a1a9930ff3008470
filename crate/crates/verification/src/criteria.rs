use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use clap::Parser;
use graspdec_cli::{execute, Cli};
use graspdec_core::classify::{kkt_residual, predict, train_svm, EvaluationConfig};
use graspdec_core::csp::csp_from_covariances;
use graspdec_core::model::{standard_bands, standard_montage, Band, EventKind, GraspClass, ObjectKind, Phase};
use graspdec_core::pipeline::{decode_session, PipelineConfig, SessionDecoding};
use graspdec_core::preprocess::{apply_filter_bank, band_filter, filtfilt, PreprocessConfig, Preprocessor};
use graspdec_core::simulate::{
    label_trials, run_protocol, synthesize_eeg, validate_event_log, GroundTruth, GroundTruthConfig, ObjectSchedule,
    ProtocolConfig,
};
use graspdec_core::topomap::{export_csp_maps, interpolate_scalp, nearest_cell_value, MapKind, MAX_ABS};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::oracle;
use crate::Verdict;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Runs a `graspdec` command line in-process and returns its stdout.
fn graspdec(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("graspdec").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    execute(cli.command)
        .map(|outcome| outcome.stdout)
        .map_err(|e| format!("graspdec {} failed with exit code {}: {e}", args[0], e.exit_code()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TABLE_COLUMNS: [(&str, &str); 10] = [
    ("observation", "delta"),
    ("observation", "theta"),
    ("observation", "alpha"),
    ("observation", "beta"),
    ("observation", "gamma"),
    ("movement", "delta"),
    ("movement", "theta"),
    ("movement", "alpha"),
    ("movement", "beta"),
    ("movement", "gamma"),
];

const TABLE_ROWS: [(&str, [u32; 10]); 5] = [
    ("s1", [45, 55, 80, 50, 60, 45, 50, 65, 45, 70]),
    ("s2", [75, 60, 70, 60, 50, 65, 40, 60, 50, 45]),
    ("s3", [80, 65, 70, 75, 65, 60, 65, 80, 80, 75]),
    ("s4", [80, 60, 85, 60, 70, 65, 75, 75, 65, 60]),
    ("s5", [60, 65, 65, 75, 55, 40, 65, 55, 55, 65]),
];

const PRINTED_MEAN: [u32; 10] = [68, 61, 74, 64, 65, 55, 59, 67, 59, 63];

pub fn table_arithmetic() -> Verdict {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for (subject, cells) in TABLE_ROWS {
        let entries: Vec<serde_json::Value> = TABLE_COLUMNS
            .iter()
            .zip(cells)
            .map(|((phase, band), v)| {
                serde_json::json!({"phase": phase, "band": band, "accuracy_percent": v as f64, "n_test": 20})
            })
            .collect();
        let file = tmp.path().join(format!("{subject}.json"));
        fs::write(&file, serde_json::json!({"subject_id": subject, "entries": entries}).to_string())
            .map_err(|e| e.to_string())?;
        files.push(file);
    }
    let mut args = vec!["report", "--format", "csv"];
    args.extend(files.iter().map(|f| path(f)));
    let text = graspdec(&args)?;
    let mean_line = text.lines().find(|l| l.starts_with("Mean,")).ok_or("no Mean row in report")?;
    let header = text.lines().next().unwrap_or_default();
    let expected_header: Vec<String> = TABLE_COLUMNS.iter().map(|(p, b)| format!("{p}_{b}")).collect();
    check(header == format!("subject,{}", expected_header.join(",")), || format!("unexpected header `{header}`"))?;
    let mean: Vec<u32> = mean_line.split(',').skip(1).map(|v| v.parse().unwrap_or(u32::MAX)).collect();
    let wrong: Vec<String> = TABLE_COLUMNS
        .iter()
        .zip(mean.iter().zip(PRINTED_MEAN))
        .filter(|(_, (got, want))| **got != *want)
        .map(|((p, b), (got, want))| format!("{b} {p}: report {got}, printed {want}"))
        .collect();
    check(wrong.is_empty(), || format!("Mean row differs from the printed table: {}", wrong.join("; ")))?;
    Ok(format!("Mean row {mean:?}"))
}

fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

pub fn csp_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut off, mut comp, mut eig) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..200 {
        let n = 2 + case % 7;
        let c1 = oracle::random_spd(n, &mut rng);
        let c2 = oracle::random_spd(n, &mut rng);
        let m1 = DMatrix::from_fn(n, n, |i, j| c1[i][j]);
        let m2 = DMatrix::from_fn(n, n, |i, j| c2[i][j]);
        let model = csp_from_covariances(&m1, &m2, None, Phase::Observation).map_err(|e| format!("case {case}: {e}"))?;
        let w = &model.projection;
        let d1 = w * &m1 * w.transpose();
        let d2 = w * &m2 * w.transpose();
        off = off.max(max_off_diagonal(&d1)).max(max_off_diagonal(&d2));
        for i in 0..n {
            comp = comp.max((d1[(i, i)] + d2[(i, i)] - 1.0).abs());
        }
        let reference = oracle::generalized_eigenvalues(&c1, &c2);
        for (got, want) in model.eigenvalues.iter().zip(&reference) {
            eig = eig.max((got - want).abs());
        }
    }
    check(off <= 1e-8, || format!("off-diagonal {off:e}"))?;
    check(comp <= 1e-8, || format!("complementarity error {comp:e}"))?;
    check(eig <= 1e-8, || format!("eigenvalue error vs Jacobi oracle {eig:e}"))?;
    Ok(format!("200 pairs: off-diagonal {off:.1e}, complementarity {comp:.1e}, oracle {eig:.1e}"))
}

const FS: f64 = 250.0;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn filter_suite() -> Verdict {
    let pre = Preprocessor::design(&PreprocessConfig::default(), FS).map_err(|e| e.to_string())?;
    let (lo_db, hi_db) = (pre.broadband.magnitude_db(0.5), pre.broadband.magnitude_db(40.0));
    for (f, db) in [(0.5, lo_db), (40.0, hi_db)] {
        check((db + 3.0).abs() <= 0.5, || format!("broadband gain at {f} Hz is {db:.3} dB"))?;
    }

    // steady state: two seconds of settling are dropped at each end
    let sine: Vec<f64> = (0..20 * 250).map(|i| (2.0 * PI * 60.0 * i as f64 / FS).sin()).collect();
    let notched = filtfilt(&pre.notch, &sine).map_err(|e| e.to_string())?;
    let skip = 2 * 250;
    let ratio = rms(&notched[skip..sine.len() - skip]) / rms(&sine[skip..sine.len() - skip]);
    check(ratio <= 0.01, || format!("60 Hz sine keeps {:.2}% RMS", 100.0 * ratio))?;

    for band in standard_bands() {
        let f = band_filter(&band, FS).map_err(|e| e.to_string())?;
        let center = if band.low_hz == 0.0 { band.high_hz / 2.0 } else { (band.low_hz * band.high_hz).sqrt() };
        let x: Vec<f64> = (0..5000).map(|i| (2.0 * PI * center * i as f64 / FS).sin()).collect();
        let y = filtfilt(&f, &x).map_err(|e| e.to_string())?;
        let xcorr = |lag: isize| -> f64 { (1000..4000).map(|i| x[i] * y[(i as isize + lag) as usize]).sum() };
        let best = (-40..=40).max_by(|a, b| xcorr(*a).total_cmp(&xcorr(*b))).unwrap();
        check(best == 0, || format!("{} band peaks at lag {best}", band.name))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<f64> = (0..60 * 250).map(|_| rng.sample(StandardNormal)).collect();
    let signals = Array2::from_shape_vec((1, noise.len()), noise).map_err(|e| e.to_string())?;
    let bank = apply_filter_bank(signals.view(), &[Band::Alpha.definition()], FS).map_err(|e| e.to_string())?;
    let alpha: Vec<Complex<f64>> = bank.bands[0].signals.row(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut spectrum = alpha;
    let n = spectrum.len();
    FftPlanner::new().plan_fft_forward(n).process(&mut spectrum);
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in spectrum.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * FS / n as f64;
        total += c.norm_sqr();
        if (6.0..=15.0).contains(&f) {
            inside += c.norm_sqr();
        }
    }
    let share = inside / total;
    check(share >= 0.90, || format!("alpha output has {:.1}% of power in 6–15 Hz", 100.0 * share))?;

    Ok(format!(
        "cutoffs {lo_db:.2}/{hi_db:.2} dB, notch residual {:.3}%, zero lag in 5 bands, {:.1}% in 6–15 Hz",
        100.0 * ratio,
        100.0 * share
    ))
}

fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (norm(a) * norm(b))).abs()
}

fn alpha_holdout(seed: u64, contrast: f64) -> Result<(SessionDecoding, GroundTruth), String> {
    let events = run_protocol(&ProtocolConfig { seed, ..ProtocolConfig::fifty_per_object() }).map_err(|e| e.to_string())?;
    let art = synthesize_eeg(&events, &GroundTruthConfig::planted_alpha(seed, contrast)).map_err(|e| e.to_string())?;
    let config = PipelineConfig {
        bands: vec![Band::Alpha.definition()],
        evaluation: EvaluationConfig { seed, ..Default::default() },
        ..Default::default()
    };
    let decoding = decode_session(&art.recording, &art.events, &config).map_err(|e| e.to_string())?;
    Ok((decoding, art.ground_truth))
}

pub fn end_to_end() -> Verdict {
    let (decoding, truth) = alpha_holdout(0, 4.0)?;
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for r in &decoding.results {
        let source = match r.phase {
            Phase::Observation => "occipital_alpha",
            Phase::Movement => "central_alpha",
        };
        let planted = truth.mixing_column(source).ok_or("planted source missing")?;
        let top: Vec<f64> = r.evaluation.folds[0].csp.patterns.column(0).iter().copied().collect();
        let cos = abs_cosine(&top, &planted);
        let acc = r.evaluation.accuracy;
        report.push(format!("{} {}% of {} (|cos| {cos:.3})", r.phase, acc.percent, acc.total));
        if acc.percent < 90.0 {
            failures.push(format!("{} accuracy {}% < 90%", r.phase, acc.percent));
        }
        if cos < 0.95 {
            failures.push(format!("{} top pattern |cos| {cos:.3} < 0.95", r.phase));
        }
    }

    let mut sums: BTreeMap<Phase, f64> = BTreeMap::new();
    for seed in 0..20 {
        let (decoding, _) = alpha_holdout(seed, 1.0)?;
        for r in &decoding.results {
            *sums.entry(r.phase).or_default() += r.evaluation.accuracy.percent;
        }
    }
    for (phase, sum) in &sums {
        let mean = sum / 20.0;
        report.push(format!("null {phase} mean {mean:.1}%"));
        if !(42.0..=58.0).contains(&mean) {
            failures.push(format!("null {phase} mean {mean:.1}% outside [42, 58]"));
        }
    }
    if failures.is_empty() {
        Ok(report.join(", "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), report.join(", ")))
    }
}

fn svm_dataset(rng: &mut ChaCha8Rng, n: usize, separation: f64) -> (Vec<[f64; 4]>, Vec<GraspClass>) {
    let labels: Vec<GraspClass> =
        (0..n).map(|i| if i % 2 == 0 { GraspClass::Power } else { GraspClass::Precision }).collect();
    let x = labels
        .iter()
        .map(|l| {
            let shift = l.label() * separation;
            [
                shift + rng.sample::<f64, _>(StandardNormal),
                0.5 * shift + rng.sample::<f64, _>(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ]
        })
        .collect();
    (x, labels)
}

pub fn svm_suite() -> Verdict {
    let pair = [[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]];
    let model = train_svm(&pair, &[GraspClass::Power, GraspClass::Precision], 1e6).map_err(|e| e.to_string())?;
    let norm = model.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    check(model.bias.abs() <= 1e-6, || format!("symmetric pair bias {}", model.bias))?;
    check((2.0 / norm - 2.0).abs() <= 1e-6, || format!("symmetric pair margin {}", 2.0 / norm))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let (x, y) = svm_dataset(&mut rng, 10 + 2 * case, [0.3, 1.0, 3.0][case % 3]);
        let c = [0.1, 1.0, 10.0][(case / 3) % 3];
        let m = train_svm(&x, &y, c).map_err(|e| format!("dataset {case}: {e}"))?;
        worst = worst.max(kkt_residual(&m, &x, &y));
    }
    check(worst <= 1e-6, || format!("KKT residual {worst:e}"))?;

    let points = [[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
    let labels = [1.0, 1.0, -1.0, -1.0];
    let ceiling = oracle::brute_force_linear_accuracy(&points, &labels);
    check(ceiling == 0.75, || format!("brute-force XOR ceiling {ceiling}"))?;
    let x: Vec<[f64; 4]> = points.iter().map(|p| [p[0], p[1], 0.0, 0.0]).collect();
    let y: Vec<GraspClass> = labels.iter().map(|&l| GraspClass::from_label(l)).collect();
    let mut best = 0.0f64;
    for c in [0.01, 1.0, 100.0] {
        let m = train_svm(&x, &y, c).map_err(|e| e.to_string())?;
        let correct = x.iter().zip(&y).filter(|(p, l)| predict(&m, *p).map(|g| g == **l).unwrap_or(false)).count();
        best = best.max(correct as f64 / 4.0);
    }
    check(best <= ceiling, || format!("SVM fits XOR at {best}"))?;
    Ok(format!("margin {:.9}, worst KKT {worst:.1e}, XOR ceiling {ceiling}", 2.0 / norm))
}

fn random_protocol(rng: &mut ChaCha8Rng) -> ProtocolConfig {
    let objects = [ObjectKind::PowerObject, ObjectKind::PrecisionObject, ObjectKind::NoObject];
    let schedule = if rng.random_bool(0.5) {
        ObjectSchedule::BalancedRandom
    } else {
        ObjectSchedule::Fixed((0..rng.random_range(1..5)).map(|_| objects[rng.random_range(0..3)]).collect())
    };
    ProtocolConfig {
        n_blocks: rng.random_range(1..6),
        trials_per_block: rng.random_range(1..12),
        observation_s: rng.random_range(0.5..4.0),
        movement_s: rng.random_range(0.5..8.0),
        rotation_s: rng.random_range(0.5..6.0),
        rest_between_blocks_s: rng.random_range(0.2..60.0),
        inter_trial_s: rng.random_range(0.1..5.0),
        object_schedule: schedule,
        sample_rate_hz: [128.0, 250.0, 500.0][rng.random_range(0..3)],
        seed: rng.random(),
    }
}

pub fn protocol_conformance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for i in 0..100 {
        let cfg = random_protocol(&mut rng);
        let events = run_protocol(&cfg).map_err(|e| format!("config {i}: {e}"))?;
        validate_event_log(&events).map_err(|e| format!("config {i} rejected: {e}"))?;
        let trials = label_trials(&events).map_err(|e| e.to_string())?;
        check(trials.len() == cfg.n_trials(), || format!("config {i}: {} trials", trials.len()))?;
    }

    let default = ProtocolConfig::default();
    let events = run_protocol(&default).map_err(|e| e.to_string())?;
    let starts: Vec<usize> =
        events.iter().filter(|e| e.kind == EventKind::ObservationStart).map(|e| e.sample_index).collect();
    let cues: Vec<usize> = events.iter().filter(|e| e.kind == EventKind::AudioCue).map(|e| e.sample_index).collect();
    check(starts.len() == cues.len() && starts.iter().zip(&cues).all(|(s, c)| c - s == 500), || {
        "observation windows are not 500 samples".into()
    })?;
    let blocks = events.iter().filter(|e| e.kind == EventKind::BlockStart).count();
    let trials = label_trials(&events).map_err(|e| e.to_string())?.len();
    check(blocks == 5 && trials == 50, || format!("default session has {blocks} blocks, {trials} trials"))?;
    Ok(format!("100 random configs accepted; default {blocks} blocks × {} trials, 500-sample windows", trials / blocks))
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn determinism() -> Verdict {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["first", "second"] {
        let session = tmp.path().join(run).join("session");
        let decoded = tmp.path().join(run).join("decoded");
        fs::create_dir(tmp.path().join(run)).map_err(|e| e.to_string())?;
        graspdec(&["simulate", "--seed", "7", path(&session)])?;
        graspdec(&["pipeline", path(&session), path(&decoded), "--seed", "7"])?;
        trees.push(tree_bytes(&tmp.path().join(run)));
    }
    let names: Vec<&String> = trees[0].keys().collect();
    check(names == trees[1].keys().collect::<Vec<_>>(), || "runs wrote different file sets".into())?;
    let differing: Vec<&&String> = names.iter().filter(|n| trees[0][**n] != trees[1][**n]).collect();
    check(differing.is_empty(), || format!("files differ: {differing:?}"))?;
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical", names.len()))
}

pub fn topomap_contract() -> Verdict {
    let montage = standard_montage();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..10 {
        let c1 = oracle::random_spd(8, &mut rng);
        let c2 = oracle::random_spd(8, &mut rng);
        let m1 = DMatrix::from_fn(8, 8, |i, j| c1[i][j]);
        let m2 = DMatrix::from_fn(8, 8, |i, j| c2[i][j]);
        let model = csp_from_covariances(&m1, &m2, None, Phase::Movement).map_err(|e| e.to_string())?;
        for kind in [MapKind::Pattern, MapKind::Filter] {
            for map in export_csp_maps(&model, &montage, 48, kind).map_err(|e| e.to_string())? {
                let values: Vec<f64> = map.grid.values.iter().flatten().flatten().copied().collect();
                check(values.iter().all(|v| v.abs() <= MAX_ABS), || "grid value outside ±0.5".into())?;
            }
        }
    }

    let mut node_error = 0.0f64;
    for n in [8, 16, 31, 64] {
        let values: Vec<f64> = (0..8).map(|_| rng.random_range(-0.5..0.5)).collect();
        let grid = interpolate_scalp(&values, &montage, n).map_err(|e| e.to_string())?;
        for (pos, v) in montage.positions().iter().zip(&values) {
            let got = nearest_cell_value(&grid, *pos).ok_or("electrode outside grid")?;
            node_error = node_error.max((got - v).abs());
        }
    }
    check(node_error <= 1e-9, || format!("electrode node error {node_error:e}"))?;

    let mut dipole = vec![0.0; 8];
    dipole[montage.index_of("C3").unwrap()] = 0.5;
    dipole[montage.index_of("C4").unwrap()] = -0.5;
    let mut asym = 0.0f64;
    for n in [8, 9, 32, 33, 64] {
        let grid = interpolate_scalp(&dipole, &montage, n).map_err(|e| e.to_string())?;
        for row in &grid.values {
            for col in 0..n {
                match (row[col], row[n - 1 - col]) {
                    (Some(a), Some(b)) => asym = asym.max((a + b).abs()),
                    (None, None) => {}
                    _ => return Err("head mask is not mirror symmetric".into()),
                }
            }
        }
    }
    check(asym <= 1e-9, || format!("dipole antisymmetry error {asym:e}"))?;
    Ok(format!("bounded; node error {node_error:.1e}; dipole asymmetry {asym:.1e}"))
}
