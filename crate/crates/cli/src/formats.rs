//! On-disk session layout:
//!
//! - `recording.csv`: header `sample,Fz,C3,Cz,C4,Pz,PO7,Oz,PO8`, one row per
//!   sample, values in µV
//! - `meta.json`: `{subject_id, sample_rate_hz}`
//! - `events.jsonl`: one event per line
//! - `ground_truth.json`: simulator truth, absent for real recordings

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use graspdec_core::model::{standard_montage, EventLog, EventMarker, Recording};
use graspdec_core::simulate::GroundTruth;
use ndarray::Array2;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::CliError;

pub const RECORDING_FILE: &str = "recording.csv";
pub const META_FILE: &str = "meta.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub subject_id: String,
    pub sample_rate_hz: f64,
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serialisable value");
    out.push(b'\n');
    out
}

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::input(format!("{what}: {e}")))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn recording_header() -> String {
    let mut header = String::from("sample");
    for label in standard_montage().labels() {
        header.push(',');
        header.push_str(label);
    }
    header
}

pub fn write_recording_csv(recording: &Recording) -> Vec<u8> {
    let mut out = recording_header();
    out.push('\n');
    for (t, column) in recording.samples.columns().into_iter().enumerate() {
        write!(out, "{t}").unwrap();
        for v in column {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses the CSV body into a channels × samples matrix.
pub fn parse_recording_csv(bytes: &[u8]) -> Result<Array2<f64>, CliError> {
    let bad = |msg: String| CliError::input(format!("{RECORDING_FILE}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> =
        reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if header.join(",") != recording_header() {
        return Err(bad(format!("header must be `{}`, found `{}`", recording_header(), header.join(","))));
    }
    let n_channels = header.len() - 1;
    let mut values = Vec::new();
    let mut n_samples = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = row + 2;
        if record.len() != header.len() {
            return Err(bad(format!("line {line}: {} fields, expected {}", record.len(), header.len())));
        }
        match record[0].trim().parse::<usize>() {
            Ok(i) if i == row => {}
            _ => return Err(bad(format!("line {line}: sample index `{}`, expected {row}", &record[0]))),
        }
        for (c, field) in record.iter().skip(1).enumerate() {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("line {line}, channel {}: `{field}` is not a number", header[c + 1])))?;
            values.push(v);
        }
        n_samples += 1;
    }
    let by_sample = Array2::from_shape_vec((n_samples, n_channels), values).map_err(|e| bad(e.to_string()))?;
    Ok(by_sample.t().as_standard_layout().into_owned())
}

pub fn write_events_jsonl(events: &[EventMarker]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in events {
        serde_json::to_writer(&mut out, e).expect("serialisable event");
        out.push(b'\n');
    }
    out
}

pub fn parse_events_jsonl(bytes: &[u8]) -> Result<EventLog, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::input(format!("{EVENTS_FILE}: {e}")))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::input(format!("{EVENTS_FILE}: line {}: {e}", i + 1)))
        })
        .collect()
}

/// The three files the decoder needs, as read from disk.
#[derive(Debug, Clone)]
pub struct SessionFiles {
    pub recording_csv: Vec<u8>,
    pub meta_json: Vec<u8>,
    pub events_jsonl: Vec<u8>,
}

impl SessionFiles {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        Ok(Self {
            recording_csv: read_file(&dir.join(RECORDING_FILE))?,
            meta_json: read_file(&dir.join(META_FILE))?,
            events_jsonl: read_file(&dir.join(EVENTS_FILE))?,
        })
    }

    /// `(file name, contents)` in a fixed order.
    pub fn named(&self) -> [(&'static str, &[u8]); 3] {
        [
            (RECORDING_FILE, &self.recording_csv),
            (META_FILE, &self.meta_json),
            (EVENTS_FILE, &self.events_jsonl),
        ]
    }

    pub fn parse(&self) -> Result<(Recording, EventLog), CliError> {
        let meta: SessionMeta = parse_json(&self.meta_json, META_FILE)?;
        let samples = parse_recording_csv(&self.recording_csv)?;
        let recording = Recording {
            subject_id: meta.subject_id,
            sample_rate_hz: meta.sample_rate_hz,
            montage: standard_montage(),
            samples,
        };
        Ok((recording, parse_events_jsonl(&self.events_jsonl)?))
    }
}

pub fn session_outputs(recording: &Recording, events: &[EventMarker], truth: Option<&GroundTruth>) -> Vec<(String, Vec<u8>)> {
    let meta = SessionMeta { subject_id: recording.subject_id.clone(), sample_rate_hz: recording.sample_rate_hz };
    let mut files = vec![
        (RECORDING_FILE.to_string(), write_recording_csv(recording)),
        (META_FILE.to_string(), json_bytes(&meta)),
        (EVENTS_FILE.to_string(), write_events_jsonl(events)),
    ];
    if let Some(truth) = truth {
        files.push((GROUND_TRUTH_FILE.to_string(), json_bytes(truth)));
    }
    files
}
