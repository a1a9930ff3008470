//! Soft-margin linear SVM trained on the dual with sequential minimal
//! optimisation (maximal-gain working-pair selection).
//!
//! ```text
//! min  ½ αᵀQα − Σα     s.t.  0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0,   Qᵢⱼ = yᵢ yⱼ xᵢ·xⱼ
//! ```

use serde::{Deserialize, Serialize};

use super::SvmError;
use crate::model::GraspClass;

/// Stopping tolerance on the maximal KKT violation.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_parameter: f64,
    pub dual_coefficients: Vec<f64>,
    /// Maximal KKT violation at termination.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.weights.len() {
            return Err(SvmError::DimensionMismatch { expected: self.weights.len(), found: x.len() });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power when the decision value is ≥ 0, so points on the hyperplane are
/// Power.
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<GraspClass, SvmError> {
    Ok(if model.decision_value(x)? >= 0.0 { GraspClass::Power } else { GraspClass::Precision })
}

pub fn train_svm<X: AsRef<[f64]>>(samples: &[X], labels: &[GraspClass], c: f64) -> Result<SvmModel, SvmError> {
    train_svm_with_tolerance(samples, labels, c, DEFAULT_TOLERANCE)
}

pub fn train_svm_with_tolerance<X: AsRef<[f64]>>(
    samples: &[X],
    labels: &[GraspClass],
    c: f64,
    tolerance: f64,
) -> Result<SvmModel, SvmError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(SvmError::InvalidC(c));
    }
    if samples.len() != labels.len() {
        return Err(SvmError::LabelCount { samples: samples.len(), labels: labels.len() });
    }
    let n = samples.len();
    let dim = samples.first().map_or(0, |x| x.as_ref().len());
    for (index, x) in samples.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(SvmError::DimensionMismatch { expected: dim, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite { index });
        }
    }
    if !labels.contains(&GraspClass::Power) || !labels.contains(&GraspClass::Precision) {
        return Err(SvmError::SingleClass);
    }

    let y: Vec<f64> = labels.iter().map(GraspClass::label).collect();
    let kernel: Vec<Vec<f64>> = samples
        .iter()
        .map(|a| samples.iter().map(|b| dot(a.as_ref(), b.as_ref())).collect())
        .collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let (mut m_up, mut m_low);
    loop {
        // i: maximal violator from the up set
        let mut i = usize::MAX;
        m_up = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > m_up {
                m_up = -y[t] * grad[t];
                i = t;
            }
        }
        // j: largest second-order gain from the low set
        let mut j = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        m_low = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            m_low = m_low.min(v);
            if i != usize::MAX && v < m_up {
                let b = m_up - v;
                let a = (kernel[i][i] + kernel[t][t] - 2.0 * kernel[i][t]).max(TAU);
                let gain = b * b / a;
                if gain > best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || m_up - m_low <= tolerance {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(SvmError::NotConverged { iterations, residual: m_up - m_low });
        }
        iterations += 1;

        // move along d_i = y_i, d_j = -y_j, which keeps Σ αy fixed
        let b = m_up - (-y[j] * grad[j]);
        let a = (kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j]).max(TAU);
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = (b / a).min(room_i).min(room_j);

        let old_i = alpha[i];
        let old_j = alpha[j];
        alpha[i] = if step == room_i { if y[i] > 0.0 { c } else { 0.0 } } else { old_i + y[i] * step };
        alpha[j] = if step == room_j { if y[j] > 0.0 { 0.0 } else { c } } else { old_j - y[j] * step };
        let delta_i = alpha[i] - old_i;
        let delta_j = alpha[j] - old_j;
        for k in 0..n {
            grad[k] += y[k] * (y[i] * kernel[k][i] * delta_i + y[j] * kernel[k][j] * delta_j);
        }
    }

    let mut weights = vec![0.0; dim];
    for (t, x) in samples.iter().enumerate() {
        for (w, v) in weights.iter_mut().zip(x.as_ref()) {
            *w += alpha[t] * y[t] * v;
        }
    }

    let free: Vec<f64> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).map(|t| -y[t] * grad[t]).collect();
    let bias = if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else {
        match (m_up.is_finite(), m_low.is_finite()) {
            (true, true) => (m_up + m_low) / 2.0,
            (true, false) => m_up,
            (false, true) => m_low,
            (false, false) => 0.0,
        }
    };

    Ok(SvmModel {
        weights,
        bias,
        c_parameter: c,
        dual_coefficients: alpha,
        kkt_residual: (m_up - m_low).max(0.0),
        iterations,
    })
}

/// Largest violation of the dual optimality conditions, recomputed from
/// scratch for `model` on the given data.
pub fn kkt_residual<X: AsRef<[f64]>>(model: &SvmModel, samples: &[X], labels: &[GraspClass]) -> f64 {
    let c = model.c_parameter;
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for ((x, label), &a) in samples.iter().zip(labels).zip(&model.dual_coefficients) {
        let y = label.label();
        // −y·∇f = y − w·x
        let v = y - dot(&model.weights, x.as_ref());
        if (y > 0.0 && a < c) || (y < 0.0 && a > 0.0) {
            up = up.max(v);
        }
        if (y > 0.0 && a > 0.0) || (y < 0.0 && a < c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GraspClass::{Power, Precision};

    #[test]
    fn symmetric_two_points() {
        let x = [[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]];
        let m = train_svm(&x, &[Power, Precision], 1e6).unwrap();
        assert!((m.weights[0] - 1.0).abs() <= 1e-6);
        assert!(m.bias.abs() <= 1e-6);
        assert!((2.0 / m.weights[0] - 2.0).abs() <= 1e-6);
        assert!(m.kkt_residual <= 1e-6);
    }

    #[test]
    fn predict_sign_rule() {
        let m = SvmModel {
            weights: vec![1.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            c_parameter: 1.0,
            dual_coefficients: vec![],
            kkt_residual: 0.0,
            iterations: 0,
        };
        assert_eq!(predict(&m, &[3.0, 1.0, 1.0, 1.0]).unwrap(), Power);
        assert_eq!(predict(&m, &[0.0, 5.0, -2.0, 1.0]).unwrap(), Power);
        assert_eq!(predict(&m, &[-3.0, 0.0, 0.0, 0.0]).unwrap(), Precision);
        assert!(matches!(predict(&m, &[1.0]), Err(SvmError::DimensionMismatch { expected: 4, found: 1 })));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(train_svm(&[[1.0], [2.0]], &[Power, Power], 1.0), Err(SvmError::SingleClass)));
        assert!(matches!(
            train_svm(&[[1.0], [f64::NAN]], &[Power, Precision], 1.0),
            Err(SvmError::NonFinite { index: 1 })
        ));
        assert!(matches!(train_svm(&[[1.0], [2.0]], &[Power, Precision], 0.0), Err(SvmError::InvalidC(_))));
    }

    #[test]
    fn duplicated_dataset_keeps_separator() {
        let x = vec![[2.0, 1.0], [1.5, 2.5], [3.0, 3.0], [-1.0, -0.5], [0.0, -2.0], [-2.0, 1.0]];
        let y = [Power, Power, Power, Precision, Precision, Precision];
        let once = train_svm(&x, &y, 1e3).unwrap();
        let xx: Vec<_> = x.iter().chain(&x).copied().collect();
        let yy: Vec<_> = y.iter().chain(&y).copied().collect();
        let twice = train_svm(&xx, &yy, 1e3).unwrap();
        for (a, b) in once.weights.iter().zip(&twice.weights) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
        assert!((once.bias - twice.bias).abs() <= 1e-8);
    }
}
