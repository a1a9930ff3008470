//! Two-class Common Spatial Patterns.
//!
//! For mean trace-normalised class covariances C̄₁ and C̄₂ the composite
//! C̄₁ + C̄₂ is whitened, the whitened C̄₁ is diagonalised, and the two steps
//! compose into a projection W with
//!
//! ```text
//! W (C̄₁ + C̄₂) Wᵀ = I        W C̄₁ Wᵀ = diag(λ),  λ sorted descending
//! ```
//!
//! so λᵢ is the share of component i's variance owed to class 1 (power).
//! Features are log normalised variances of the first two and last two
//! components.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::epoching::Epoch;
use crate::model::{BandDefinition, GraspClass, Phase};
use crate::row_major;

/// Composite covariances worse conditioned than this get a diagonal ridge.
pub const MAX_CONDITION: f64 = 1e10;
/// Ridge size relative to trace / n.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CspError {
    #[error("{class:?} class has {found} epochs; at least 2 are required")]
    InsufficientEpochs { class: GraspClass, found: usize },
    #[error("epochs disagree: {0}")]
    InconsistentEpochs(String),
    #[error("trial {trial_id:?} has no signal energy")]
    DegenerateTrial { trial_id: Option<u32> },
    #[error("covariances must be square and equally sized, got {0}×{1} and {2}×{3}")]
    CovarianceShape(usize, usize, usize, usize),
    #[error("epoch does not match the model: {0}")]
    ModelMismatch(String),
    #[error("composite covariance is not positive definite even after regularisation")]
    NotPositiveDefinite,
    #[error("projection matrix is singular")]
    SingularProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspModel {
    pub band: Option<BandDefinition>,
    pub phase: Phase,
    /// W, one spatial filter per row.
    #[serde(with = "row_major")]
    pub projection: DMatrix<f64>,
    /// Class-1 variance fraction per component, descending.
    pub eigenvalues: Vec<f64>,
    pub selected_indices: Vec<usize>,
    /// A = W⁻¹, one spatial pattern per column.
    #[serde(with = "row_major")]
    pub patterns: DMatrix<f64>,
    /// Mean normalised covariances (power, precision) the model was fitted on,
    /// including any ridge.
    #[serde(with = "row_major::pair")]
    pub class_covariances: [DMatrix<f64>; 2],
    /// Diagonal ridge added to the composite (0 when none was needed).
    pub ridge: f64,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.projection.ncols()
    }

    pub fn n_components(&self) -> usize {
        self.projection.nrows()
    }
}

/// log-variance features of one epoch under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub trial_id: u32,
    pub band: Option<BandDefinition>,
    pub phase: Phase,
    pub grasp_class: GraspClass,
    pub values: Vec<f64>,
}

/// The first two and last two component indices (fewer when n < 4).
pub fn selected_components(n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = [0, 1, n.saturating_sub(2), n.saturating_sub(1)]
        .into_iter()
        .filter(|&i| i < n)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// X·Xᵀ / trace(X·Xᵀ) for a channels × samples matrix.
pub fn normalized_covariance(data: ArrayView2<'_, f64>) -> Option<DMatrix<f64>> {
    let xxt = data.dot(&data.t());
    let trace = xxt.diag().sum();
    if !(trace > 0.0 && trace.is_finite()) {
        return None;
    }
    let n = xxt.nrows();
    Some(DMatrix::from_fn(n, n, |i, j| xxt[[i, j]] / trace))
}

pub fn trial_covariance(epoch: &Epoch) -> Result<DMatrix<f64>, CspError> {
    normalized_covariance(epoch.data.view()).ok_or(CspError::DegenerateTrial { trial_id: Some(epoch.trial_id) })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn mean_covariance(epochs: &[Epoch]) -> Result<DMatrix<f64>, CspError> {
    let mut sum: Option<DMatrix<f64>> = None;
    for e in epochs {
        let c = trial_covariance(e)?;
        sum = Some(match sum {
            Some(s) => s + c,
            None => c,
        });
    }
    Ok(sum.expect("caller checked non-empty") / epochs.len() as f64)
}

fn check_epochs(class1: &[Epoch], class2: &[Epoch]) -> Result<(Option<BandDefinition>, Phase), CspError> {
    for (class, set) in [(GraspClass::Power, class1), (GraspClass::Precision, class2)] {
        if set.len() < 2 {
            return Err(CspError::InsufficientEpochs { class, found: set.len() });
        }
    }
    let first = &class1[0];
    for e in class1.iter().chain(class2) {
        if e.band != first.band {
            return Err(CspError::InconsistentEpochs(format!("trial {} has a different band", e.trial_id)));
        }
        if e.phase != first.phase {
            return Err(CspError::InconsistentEpochs(format!("trial {} has a different phase", e.trial_id)));
        }
        if e.data.dim() != first.data.dim() {
            return Err(CspError::InconsistentEpochs(format!(
                "trial {} has shape {:?}, expected {:?}",
                e.trial_id,
                e.data.dim(),
                first.data.dim()
            )));
        }
    }
    Ok((first.band, first.phase))
}

/// Fits W on power (`class1`) versus precision (`class2`) epochs.
pub fn fit_csp(class1: &[Epoch], class2: &[Epoch]) -> Result<CspModel, CspError> {
    let (band, phase) = check_epochs(class1, class2)?;
    csp_from_covariances(&mean_covariance(class1)?, &mean_covariance(class2)?, band, phase)
}

/// CSP from two mean class covariances.
pub fn csp_from_covariances(
    class1: &DMatrix<f64>,
    class2: &DMatrix<f64>,
    band: Option<BandDefinition>,
    phase: Phase,
) -> Result<CspModel, CspError> {
    if !class1.is_square() || class1.shape() != class2.shape() {
        return Err(CspError::CovarianceShape(class1.nrows(), class1.ncols(), class2.nrows(), class2.ncols()));
    }
    let n = class1.nrows();
    let mut c1 = symmetrize(class1);
    let mut c2 = symmetrize(class2);

    let mut composite = SymmetricEigen::new(&c1 + &c2);
    let (lo, hi) = eig_range(&composite.eigenvalues);
    let mut ridge = 0.0;
    if !(lo > 0.0 && hi / lo <= MAX_CONDITION) {
        ridge = RIDGE_SCALE * (&c1 + &c2).trace() / n as f64;
        let half = DMatrix::<f64>::identity(n, n) * (ridge / 2.0);
        c1 += &half;
        c2 += &half;
        composite = SymmetricEigen::new(&c1 + &c2);
        if eig_range(&composite.eigenvalues).0 <= 0.0 {
            return Err(CspError::NotPositiveDefinite);
        }
    }

    // P = Λ^{-1/2} Uᵀ whitens the composite.
    let inv_sqrt = composite.eigenvalues.map(|l| 1.0 / l.sqrt());
    let whitening = DMatrix::from_diagonal(&inv_sqrt) * composite.eigenvectors.transpose();
    let whitened = symmetrize(&(&whitening * &c1 * whitening.transpose()));
    let rotation = SymmetricEigen::new(whitened);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rotation.eigenvalues[b].total_cmp(&rotation.eigenvalues[a]));

    let mut projection = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (row, &k) in order.iter().enumerate() {
        let mut filter = rotation.eigenvectors.column(k).transpose() * &whitening;
        // largest-magnitude coefficient positive
        let pivot = filter.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            filter.neg_mut();
        }
        projection.set_row(row, &filter);
        eigenvalues.push(rotation.eigenvalues[k].clamp(0.0, 1.0));
    }

    let patterns = projection.clone().try_inverse().ok_or(CspError::SingularProjection)?;
    Ok(CspModel {
        band,
        phase,
        projection,
        eigenvalues,
        selected_indices: selected_components(n),
        patterns,
        class_covariances: [c1, c2],
        ridge,
    })
}

fn eig_range(values: &nalgebra::DVector<f64>) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn check_match(model: &CspModel, epoch: &Epoch) -> Result<(), CspError> {
    if epoch.data.nrows() != model.n_channels() {
        return Err(CspError::ModelMismatch(format!(
            "epoch has {} channels, model expects {}",
            epoch.data.nrows(),
            model.n_channels()
        )));
    }
    if epoch.phase != model.phase {
        return Err(CspError::ModelMismatch(format!("epoch phase {} vs model phase {}", epoch.phase, model.phase)));
    }
    if epoch.band.map(|b| b.name) != model.band.map(|b| b.name) {
        return Err(CspError::ModelMismatch(format!("epoch band {:?} vs model band {:?}", epoch.band, model.band)));
    }
    Ok(())
}

/// Z = W·X.
pub fn project(model: &CspModel, epoch: &Epoch) -> Result<Array2<f64>, CspError> {
    check_match(model, epoch)?;
    Ok(apply_projection(&model.projection, epoch.data.view()))
}

pub fn apply_projection(w: &DMatrix<f64>, data: ArrayView2<'_, f64>) -> Array2<f64> {
    let w = Array2::from_shape_fn((w.nrows(), w.ncols()), |(i, j)| w[(i, j)]);
    w.dot(&data)
}

fn variance(row: ndarray::ArrayView1<'_, f64>) -> f64 {
    let n = row.len() as f64;
    let mean = row.sum() / n;
    row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Normalised log-variance of each selected component. Component variances
/// below 1e-12 of the selected total are floored there before normalising.
pub fn log_variance_features(model: &CspModel, epoch: &Epoch) -> Result<FeatureVector, CspError> {
    let z = project(model, epoch)?;
    let vars: Vec<f64> = model.selected_indices.iter().map(|&j| variance(z.row(j))).collect();
    Ok(FeatureVector {
        trial_id: epoch.trial_id,
        band: model.band,
        phase: model.phase,
        grasp_class: epoch.grasp_class,
        values: normalized_log_variances(&vars).ok_or(CspError::DegenerateTrial { trial_id: Some(epoch.trial_id) })?,
    })
}

/// `log(v_j / Σ v)` with a relative floor; `None` when every variance is 0.
pub fn normalized_log_variances(vars: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = vars.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let floor = 1e-12 * total;
    let floored: Vec<f64> = vars.iter().map(|v| v.max(floor)).collect();
    let sum: f64 = floored.iter().sum();
    Some(floored.iter().map(|v| (v / sum).ln()).collect())
}

/// Mixing patterns (columns of W⁻¹), raw and rescaled to max |value| = 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPatterns {
    pub matrix: DMatrix<f64>,
    pub scaled: Vec<Vec<f64>>,
}

pub fn spatial_patterns(model: &CspModel) -> Result<SpatialPatterns, CspError> {
    let matrix = model.projection.clone().try_inverse().ok_or(CspError::SingularProjection)?;
    let scaled = matrix
        .column_iter()
        .map(|c| crate::topomap::scale_pattern(c.as_slice()).map_err(|_| CspError::SingularProjection))
        .collect::<Result<_, _>>()?;
    Ok(SpatialPatterns { matrix, scaled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn epoch(trial_id: u32, data: Array2<f64>) -> Epoch {
        Epoch { trial_id, phase: Phase::Observation, grasp_class: GraspClass::Power, band: None, data }
    }

    #[test]
    fn identity_like_trial_covariance() {
        let c = trial_covariance(&epoch(0, array![[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn rank_one_trial_covariance() {
        let c = trial_covariance(&epoch(0, array![[1.0, -2.0, 0.5, 3.0], [2.0, -4.0, 1.0, 6.0]])).unwrap();
        assert_abs_diff_eq!(c.trace(), 1.0, epsilon = 1e-12);
        let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_epoch_is_degenerate() {
        assert_eq!(
            trial_covariance(&epoch(4, Array2::zeros((8, 500)))),
            Err(CspError::DegenerateTrial { trial_id: Some(4) })
        );
    }

    #[test]
    fn planted_diagonal_pair() {
        let c1 = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.2]);
        let c2 = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.8]);
        let m = csp_from_covariances(&c1, &c2, None, Phase::Movement).unwrap();
        assert_abs_diff_eq!(m.eigenvalues[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eigenvalues[1], 0.2, epsilon = 1e-12);
        // composite is the identity, so filters are the unit axes
        assert_abs_diff_eq!(m.projection[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.projection[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.projection[(1, 1)], 1.0, epsilon = 1e-12);
        assert_eq!(m.selected_indices, vec![0, 1]);
        assert_eq!(m.ridge, 0.0);
    }

    #[test]
    fn identical_classes_give_half() {
        let c = DMatrix::from_fn(8, 8, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let m = csp_from_covariances(&c, &c, None, Phase::Observation).unwrap();
        for l in &m.eigenvalues {
            assert_abs_diff_eq!(*l, 0.5, epsilon = 1e-10);
        }
        assert_eq!(m.selected_indices, vec![0, 1, 6, 7]);
    }

    #[test]
    fn rank_deficient_composite_is_ridged() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let c1 = &v * v.transpose() / 14.0;
        let m = csp_from_covariances(&c1, &c1, None, Phase::Observation).unwrap();
        assert!(m.ridge > 0.0);
        let composite = &m.class_covariances[0] + &m.class_covariances[1];
        let white = &m.projection * composite * m.projection.transpose();
        assert!((white - DMatrix::<f64>::identity(3, 3)).amax() < 1e-6);
    }

    #[test]
    fn filters_follow_sign_convention() {
        let c1 = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2]);
        let c2 = DMatrix::from_row_slice(3, 3, &[0.2, -0.05, 0.0, -0.05, 0.3, 0.0, 0.0, 0.0, 0.5]);
        let m = csp_from_covariances(&c1, &c2, None, Phase::Observation).unwrap();
        for row in m.projection.row_iter() {
            let pivot = row.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn identity_and_scaled_projection() {
        let x = Array2::from_shape_fn((8, 50), |(c, t)| ((c * 13 + t * 7) % 11) as f64 - 5.0);
        let mut m = csp_from_covariances(
            &DMatrix::identity(8, 8),
            &DMatrix::identity(8, 8),
            None,
            Phase::Observation,
        )
        .unwrap();
        m.projection = DMatrix::identity(8, 8);
        let e = epoch(0, x.clone());
        assert_eq!(project(&m, &e).unwrap(), x);
        m.projection *= 2.0;
        let z = project(&m, &e).unwrap();
        for c in 0..8 {
            assert_abs_diff_eq!(variance(z.row(c)), 4.0 * variance(x.row(c)), epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_checks_shape_and_phase() {
        let m = csp_from_covariances(&DMatrix::identity(8, 8), &DMatrix::identity(8, 8), None, Phase::Observation)
            .unwrap();
        assert!(matches!(project(&m, &epoch(0, Array2::ones((7, 10)))), Err(CspError::ModelMismatch(_))));
        let mut e = epoch(0, Array2::ones((8, 10)));
        e.phase = Phase::Movement;
        assert!(matches!(project(&m, &e), Err(CspError::ModelMismatch(_))));
    }

    #[test]
    fn feature_normalisation() {
        let f = normalized_log_variances(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for v in &f {
            assert_abs_diff_eq!(*v, 0.25f64.ln(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(0.25f64.ln(), -1.3863, epsilon = 1e-4);

        let f = normalized_log_variances(&[2.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(f[0] > f[1] && f[1] == f[2] && f[2] > f[3]);
        assert!(f.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert_abs_diff_eq!(f.iter().map(|v| v.exp()).sum::<f64>(), 1.0, epsilon = 1e-12);

        assert!(normalized_log_variances(&[0.0; 4]).is_none());
    }

    #[test]
    fn orthonormal_projection_patterns_are_transpose() {
        let c1 = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.2]);
        let c2 = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.8]);
        let mut m = csp_from_covariances(&c1, &c2, None, Phase::Movement).unwrap();
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        m.projection = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let p = spatial_patterns(&m).unwrap();
        assert!((&p.matrix - m.projection.transpose()).amax() < 1e-12);
        assert!((&p.matrix * &m.projection - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
        for col in &p.scaled {
            assert_abs_diff_eq!(col.iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn model_json_is_row_major() {
        let c1 = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.1, 0.3]);
        let c2 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.7]);
        let m = csp_from_covariances(&c1, &c2, None, Phase::Movement).unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["projection"][0][1].as_f64().unwrap(), m.projection[(0, 1)]);
        let back: CspModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
    }
}
