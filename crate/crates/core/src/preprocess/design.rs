//! IIR filter design: Butterworth low-pass/band-pass via bilinear transform
//! with frequency pre-warping, and a second-order notch. Filters are kept as
//! cascades of second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FilterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Notch,
    Bandpass,
    Lowpass,
}

/// H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a[0]` is always 1.
    pub a: [f64; 3],
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad { b: [1.0, 0.0, 0.0], a: [1.0, 0.0, 0.0] };

    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    /// Roots of z² + a1 z + a2.
    pub fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    /// DC gain of the section.
    fn step_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form II state reached after a unit step settles.
    fn step_state(&self) -> [f64; 2] {
        let y = self.step_gain();
        let z1 = self.b[2] - self.a[2] * y;
        let z0 = self.b[1] - self.a[1] * y + z1;
        [z0, z1]
    }

    #[inline]
    fn tick(&self, x: f64, state: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * x + state[0];
        state[0] = self.b[1] * x - self.a[1] * y + state[1];
        state[1] = self.b[2] * x - self.a[2] * y;
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub kind: FilterKind,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
}

/// A stable cascade of second-order sections plus the parameters it was
/// designed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    sections: Vec<Biquad>,
    design_meta: DesignMeta,
}

impl IirFilter {
    /// Validates coefficients and stability.
    pub fn new(sections: Vec<Biquad>, design_meta: DesignMeta) -> Result<Self, FilterError> {
        if sections.is_empty() {
            return Err(FilterError::NoSections);
        }
        for (index, s) in sections.iter().enumerate() {
            if s.b.iter().chain(s.a.iter()).any(|c| !c.is_finite()) {
                return Err(FilterError::NonFinite { index });
            }
            if s.a[0] != 1.0 {
                return Err(FilterError::Unnormalized { index, a0: s.a[0] });
            }
            let magnitude = s.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
            if magnitude >= 1.0 {
                return Err(FilterError::Unstable { index, magnitude });
            }
        }
        Ok(Self { sections, design_meta })
    }

    pub fn identity(sample_rate_hz: f64) -> Self {
        Self {
            sections: vec![Biquad::IDENTITY],
            design_meta: DesignMeta {
                kind: FilterKind::Lowpass,
                low_hz: 0.0,
                high_hz: sample_rate_hz / 2.0,
                order: 0,
                sample_rate_hz,
                quality_factor: None,
            },
        }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn design_meta(&self) -> &DesignMeta {
        &self.design_meta
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.design_meta.sample_rate_hz
    }

    /// Order of the cascade's transfer function.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz();
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude(freq_hz).log10()
    }

    /// Causal filtering from rest.
    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut states = vec![[0.0; 2]; self.sections.len()];
        self.run(signal, &mut states)
    }

    /// Per-section state that makes the cascade start in equilibrium with a
    /// constant input of 1.
    pub(crate) fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z0, z1] = s.step_state();
                let st = [z0 * scale, z1 * scale];
                scale *= s.step_gain();
                st
            })
            .collect()
    }

    pub(crate) fn run(&self, signal: &[f64], states: &mut [[f64; 2]]) -> Vec<f64> {
        signal
            .iter()
            .map(|&x| {
                self.sections
                    .iter()
                    .zip(states.iter_mut())
                    .fold(x, |acc, (s, st)| s.tick(acc, st))
            })
            .collect()
    }
}

const SUPPORTED_ORDERS: [usize; 4] = [2, 4, 6, 8];

fn prewarp(freq_hz: f64, sample_rate_hz: f64) -> f64 {
    2.0 * sample_rate_hz * (PI * freq_hz / sample_rate_hz).tan()
}

/// Analog Butterworth prototype poles (unit cutoff) in the upper half-plane;
/// the rest are their conjugates.
fn prototype_poles(order: usize) -> impl Iterator<Item = Complex64> {
    let n = order as f64;
    (0..order / 2).map(move |k| {
        let theta = PI * (2.0 * k as f64 + 1.0 + n) / (2.0 * n);
        Complex64::from_polar(1.0, theta)
    })
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (fs2 + s) / (fs2 - s)
}

fn section_from_pole(b: [f64; 3], pole: Complex64) -> Biquad {
    Biquad { b, a: [1.0, -2.0 * pole.re, pole.norm_sqr()] }
}

/// Butterworth design. `order` is the order of the low-pass prototype, so a
/// band-pass has `2 * order` poles. Low-pass designs use `high_hz` as the
/// cutoff and require `low_hz == 0`.
pub fn design_butterworth(
    kind: FilterKind,
    low_hz: f64,
    high_hz: f64,
    order: usize,
    sample_rate_hz: f64,
) -> Result<IirFilter, FilterError> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return Err(FilterError::UnsupportedOrder(order));
    }
    let nyquist = sample_rate_hz / 2.0;
    let cutoffs_ok = sample_rate_hz.is_finite()
        && sample_rate_hz > 0.0
        && low_hz >= 0.0
        && low_hz < high_hz
        && high_hz < nyquist;
    if !cutoffs_ok {
        return Err(FilterError::InvalidCutoff { low_hz, high_hz, nyquist });
    }

    let fs2 = 2.0 * sample_rate_hz;
    let (sections, gain) = match kind {
        FilterKind::Lowpass => {
            if low_hz != 0.0 {
                return Err(FilterError::InvalidCutoff { low_hz, high_hz, nyquist });
            }
            let wc = prewarp(high_hz, sample_rate_hz);
            let mut denom = Complex64::new(1.0, 0.0);
            let mut sections = Vec::with_capacity(order / 2);
            for p in prototype_poles(order) {
                let s = p * wc;
                denom *= (fs2 - s) * (fs2 - s.conj());
                // both zeros at infinity map to z = -1
                sections.push(section_from_pole([1.0, 2.0, 1.0], bilinear(s, fs2)));
            }
            (sections, wc.powi(order as i32) / denom.re)
        }
        FilterKind::Bandpass => {
            if low_hz == 0.0 {
                return Err(FilterError::InvalidCutoff { low_hz, high_hz, nyquist });
            }
            let w1 = prewarp(low_hz, sample_rate_hz);
            let w2 = prewarp(high_hz, sample_rate_hz);
            let bw = w2 - w1;
            let w0_sq = w1 * w2;
            let mut denom = Complex64::new(1.0, 0.0);
            let mut sections = Vec::with_capacity(order);
            for p in prototype_poles(order) {
                let half = p * (bw / 2.0);
                let root = (half * half - w0_sq).sqrt();
                for s in [half + root, half - root] {
                    denom *= (fs2 - s) * (fs2 - s.conj());
                    // one zero at s = 0 (z = 1), one at infinity (z = -1)
                    sections.push(section_from_pole([1.0, 0.0, -1.0], bilinear(s, fs2)));
                }
            }
            (sections, bw.powi(order as i32) * fs2.powi(order as i32) / denom.re)
        }
        FilterKind::Notch => return Err(FilterError::WrongKind(kind)),
    };

    let mut sections = sections;
    for c in sections[0].b.iter_mut() {
        *c *= gain;
    }
    IirFilter::new(
        sections,
        DesignMeta { kind, low_hz, high_hz, order, sample_rate_hz, quality_factor: None },
    )
}

pub const DEFAULT_NOTCH_Q: f64 = 30.0;

/// Second-order IIR notch with unit gain at DC and Nyquist.
pub fn design_notch(center_hz: f64, sample_rate_hz: f64, quality_factor: f64) -> Result<IirFilter, FilterError> {
    let nyquist = sample_rate_hz / 2.0;
    if !(center_hz > 0.0 && center_hz < nyquist) {
        return Err(FilterError::InvalidCutoff { low_hz: center_hz, high_hz: center_hz, nyquist });
    }
    if !(quality_factor.is_finite() && quality_factor > 0.0) {
        return Err(FilterError::InvalidQuality(quality_factor));
    }
    let w0 = 2.0 * PI * center_hz / sample_rate_hz;
    let bandwidth = w0 / quality_factor;
    let gain = 1.0 / (1.0 + (bandwidth / 2.0).tan());
    let cos_w0 = w0.cos();
    let section = Biquad {
        b: [gain, -2.0 * gain * cos_w0, gain],
        a: [1.0, -2.0 * gain * cos_w0, 2.0 * gain - 1.0],
    };
    IirFilter::new(
        vec![section],
        DesignMeta {
            kind: FilterKind::Notch,
            low_hz: center_hz,
            high_hz: center_hz,
            order: 2,
            sample_rate_hz,
            quality_factor: Some(quality_factor),
        },
    )
}
