//! Notch and Butterworth filtering, zero-phase application and filter-bank
//! decomposition.
//!
//! The continuous chain is: 60 Hz notch, then a 0.5–40 Hz band-pass, then
//! one band-pass per filter-bank band (a low-pass for delta). Every stage is
//! applied forward and backward.

mod design;
mod zero_phase;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use design::{design_butterworth, design_notch, Biquad, DesignMeta, FilterKind, IirFilter, DEFAULT_NOTCH_Q};
pub use zero_phase::{filtfilt, pad_length};

use crate::model::BandDefinition;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("invalid cutoffs {low_hz}–{high_hz} Hz (need 0 ≤ low < high < {nyquist} Hz)")]
    InvalidCutoff { low_hz: f64, high_hz: f64, nyquist: f64 },
    #[error("unsupported Butterworth order {0} (expected 2, 4, 6 or 8)")]
    UnsupportedOrder(usize),
    #[error("notch quality factor must be positive, got {0}")]
    InvalidQuality(f64),
    #[error("{0:?} is not a Butterworth design")]
    WrongKind(FilterKind),
    #[error("filter has no sections")]
    NoSections,
    #[error("section {index} has a non-finite coefficient")]
    NonFinite { index: usize },
    #[error("section {index} denominator is not normalised (a0 = {a0})")]
    Unnormalized { index: usize, a0: f64 },
    #[error("section {index} is unstable (pole magnitude {magnitude})")]
    Unstable { index: usize, magnitude: f64 },
    #[error("signal has {len} samples; zero-phase filtering needs at least {min}")]
    TooShort { len: usize, min: usize },
}

pub const BANK_ORDER: usize = 4;

/// The Butterworth used for one filter-bank band. A band starting at 0 Hz
/// becomes a low-pass at its upper edge.
pub fn band_filter(band: &BandDefinition, sample_rate_hz: f64) -> Result<IirFilter, FilterError> {
    if band.low_hz == 0.0 {
        design_butterworth(FilterKind::Lowpass, 0.0, band.high_hz, BANK_ORDER, sample_rate_hz)
    } else {
        design_butterworth(FilterKind::Bandpass, band.low_hz, band.high_hz, BANK_ORDER, sample_rate_hz)
    }
}

/// Zero-phase filters every row of `signals`. Rows are processed in
/// parallel; each row's result does not depend on scheduling.
pub fn filtfilt_rows(filter: &IirFilter, signals: ArrayView2<'_, f64>) -> Result<Array2<f64>, FilterError> {
    let rows: Vec<Vec<f64>> = (0..signals.nrows())
        .into_par_iter()
        .map(|r| filtfilt(filter, &signals.row(r).to_vec()))
        .collect::<Result<_, _>>()?;
    let (n_rows, n_cols) = signals.dim();
    Ok(Array2::from_shape_vec((n_rows, n_cols), rows.concat()).expect("row lengths are preserved"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSignal {
    pub band: BandDefinition,
    pub signals: Array2<f64>,
}

/// Band-filtered copies of the input, in the order the bands were requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankOutput {
    pub bands: Vec<BandSignal>,
}

impl FilterBankOutput {
    pub fn get(&self, name: crate::model::Band) -> Option<&Array2<f64>> {
        self.bands.iter().find(|b| b.band.name == name).map(|b| &b.signals)
    }
}

pub fn apply_filter_bank(
    signals: ArrayView2<'_, f64>,
    bands: &[BandDefinition],
    sample_rate_hz: f64,
) -> Result<FilterBankOutput, FilterError> {
    let bands = bands
        .par_iter()
        .map(|band| {
            let filter = band_filter(band, sample_rate_hz)?;
            Ok(BandSignal { band: *band, signals: filtfilt_rows(&filter, signals)? })
        })
        .collect::<Result<Vec<_>, FilterError>>()?;
    Ok(FilterBankOutput { bands })
}

/// Parameters of the continuous-signal cleanup applied before the bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub notch_hz: f64,
    pub notch_q: f64,
    pub broadband_low_hz: f64,
    pub broadband_high_hz: f64,
    pub order: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { notch_hz: 60.0, notch_q: DEFAULT_NOTCH_Q, broadband_low_hz: 0.5, broadband_high_hz: 40.0, order: 4 }
    }
}

/// Designed notch + broadband filters, ready to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub notch: IirFilter,
    pub broadband: IirFilter,
}

impl Preprocessor {
    pub fn design(config: &PreprocessConfig, sample_rate_hz: f64) -> Result<Self, FilterError> {
        Ok(Self {
            notch: design_notch(config.notch_hz, sample_rate_hz, config.notch_q)?,
            broadband: design_butterworth(
                FilterKind::Bandpass,
                config.broadband_low_hz,
                config.broadband_high_hz,
                config.order,
                sample_rate_hz,
            )?,
        })
    }

    pub fn apply(&self, signals: ArrayView2<'_, f64>) -> Result<Array2<f64>, FilterError> {
        let notched = filtfilt_rows(&self.notch, signals)?;
        filtfilt_rows(&self.broadband, notched.view())
    }
}
