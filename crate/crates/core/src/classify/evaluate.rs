use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::svm::{predict, train_svm, SvmModel};
use super::EvalError;
use crate::csp::{fit_csp, log_variance_features, CspModel, FeatureVector};
use crate::epoching::{epochs_by_class, Epoch};
use crate::model::GraspClass;
use crate::rng::{substream, SPLITTING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluationScheme {
    HoldOut { test_fraction: f64, stratified: bool },
    KFold { k: usize, stratified: bool },
}

impl Default for EvaluationScheme {
    fn default() -> Self {
        EvaluationScheme::HoldOut { test_fraction: 0.2, stratified: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub scheme: EvaluationScheme,
    pub seed: u64,
    pub c_parameter: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { scheme: EvaluationScheme::default(), seed: 0, c_parameter: 1.0 }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        match self.scheme {
            EvaluationScheme::HoldOut { test_fraction, .. } if !(test_fraction > 0.0 && test_fraction < 1.0) => {
                Err(EvalError::InvalidConfig(format!("test_fraction {test_fraction} must lie in (0, 1)")))
            }
            EvaluationScheme::KFold { k, .. } if k < 2 => {
                Err(EvalError::InvalidConfig(format!("k = {k}; at least 2 folds are required")))
            }
            _ if !(self.c_parameter.is_finite() && self.c_parameter > 0.0) => {
                Err(EvalError::InvalidConfig(format!("C = {} must be positive", self.c_parameter)))
            }
            _ => Ok(()),
        }
    }
}

/// Indices into the evaluated sample list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled(mut idx: Vec<usize>, rng: &mut crate::rng::StreamRng) -> Vec<usize> {
    idx.shuffle(rng);
    idx
}

/// Train/test partitions for `labels` under `config`. Every split's
/// training part contains both classes.
pub fn make_splits(labels: &[GraspClass], config: &EvaluationConfig) -> Result<Vec<Split>, EvalError> {
    config.validate()?;
    let n = labels.len();
    let mut rng = substream(config.seed, SPLITTING);
    let by_class = |class: GraspClass| -> Vec<usize> { (0..n).filter(|&i| labels[i] == class).collect() };

    let mut splits = match config.scheme {
        EvaluationScheme::HoldOut { test_fraction, stratified } => {
            let groups = if stratified {
                vec![by_class(GraspClass::Power), by_class(GraspClass::Precision)]
            } else {
                vec![(0..n).collect()]
            };
            let mut test = Vec::new();
            let mut train = Vec::new();
            for group in groups {
                let group = shuffled(group, &mut rng);
                let n_test = (test_fraction * group.len() as f64).round() as usize;
                let n_test = n_test.clamp(usize::from(group.len() > 1), group.len().saturating_sub(1));
                test.extend_from_slice(&group[..n_test]);
                train.extend_from_slice(&group[n_test..]);
            }
            vec![Split { train, test }]
        }
        EvaluationScheme::KFold { k, stratified } => {
            if k > n {
                return Err(EvalError::InvalidConfig(format!("{k} folds for {n} samples")));
            }
            let mut folds = vec![Vec::new(); k];
            let groups = if stratified {
                vec![by_class(GraspClass::Power), by_class(GraspClass::Precision)]
            } else {
                vec![(0..n).collect()]
            };
            let mut offset = 0;
            for group in groups {
                for (p, idx) in shuffled(group, &mut rng).into_iter().enumerate() {
                    folds[(offset + p) % k].push(idx);
                }
                offset += n;
            }
            (0..k)
                .map(|f| Split {
                    test: folds[f].clone(),
                    train: (0..k).filter(|&g| g != f).flat_map(|g| folds[g].iter().copied()).collect(),
                })
                .collect()
        }
    };

    for (fold, split) in splits.iter_mut().enumerate() {
        split.train.sort_unstable();
        split.test.sort_unstable();
        let has = |c| split.train.iter().any(|&i| labels[i] == c);
        if !(has(GraspClass::Power) && has(GraspClass::Precision)) {
            return Err(EvalError::SingleClassFold { fold });
        }
        if split.test.is_empty() {
            return Err(EvalError::EmptyTestSet { fold });
        }
    }
    Ok(splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub percent: f64,
}

impl Accuracy {
    pub fn new(correct: usize, total: usize) -> Self {
        let percent = if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 };
        Self { correct, total, percent }
    }
}

/// Accuracy of a linear SVM on precomputed features, pooled over all test
/// folds.
pub fn evaluate<X: AsRef<[f64]>>(
    features: &[X],
    labels: &[GraspClass],
    config: &EvaluationConfig,
) -> Result<Accuracy, EvalError> {
    if features.len() != labels.len() {
        return Err(EvalError::InvalidConfig(format!("{} features for {} labels", features.len(), labels.len())));
    }
    let mut correct = 0;
    let mut total = 0;
    for split in make_splits(labels, config)? {
        let train_x: Vec<&[f64]> = split.train.iter().map(|&i| features[i].as_ref()).collect();
        let train_y: Vec<GraspClass> = split.train.iter().map(|&i| labels[i]).collect();
        let model = train_svm(&train_x, &train_y, config.c_parameter)?;
        for &i in &split.test {
            correct += usize::from(predict(&model, features[i].as_ref())? == labels[i]);
            total += 1;
        }
    }
    Ok(Accuracy::new(correct, total))
}

/// Everything fitted and predicted on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub split: Split,
    pub csp: CspModel,
    pub svm: SvmModel,
    pub train_features: Vec<FeatureVector>,
    pub test_features: Vec<FeatureVector>,
    pub predictions: Vec<GraspClass>,
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEvaluation {
    pub folds: Vec<FoldResult>,
    pub accuracy: Accuracy,
}

/// Leakage-safe evaluation: CSP and SVM are fitted on each split's training
/// epochs only and applied to its test epochs.
pub fn evaluate_epochs(epochs: &[Epoch], config: &EvaluationConfig) -> Result<EpochEvaluation, EvalError> {
    let labels: Vec<GraspClass> = epochs.iter().map(|e| e.grasp_class).collect();
    let mut folds = Vec::new();
    let mut correct = 0;
    let mut total = 0;
    for split in make_splits(&labels, config)? {
        let train: Vec<Epoch> = split.train.iter().map(|&i| epochs[i].clone()).collect();
        let (power, precision) = epochs_by_class(&train);
        let csp = fit_csp(&power, &precision)?;
        let featurize = |idx: &[usize]| -> Result<Vec<FeatureVector>, EvalError> {
            idx.iter().map(|&i| Ok(log_variance_features(&csp, &epochs[i])?)).collect()
        };
        let train_features = featurize(&split.train)?;
        let test_features = featurize(&split.test)?;
        let train_x: Vec<&[f64]> = train_features.iter().map(|f| f.values.as_slice()).collect();
        let train_y: Vec<GraspClass> = train_features.iter().map(|f| f.grasp_class).collect();
        let svm = train_svm(&train_x, &train_y, config.c_parameter)?;
        let predictions = test_features
            .iter()
            .map(|f| predict(&svm, &f.values))
            .collect::<Result<Vec<_>, _>>()?;
        let fold_correct = predictions.iter().zip(&test_features).filter(|(p, f)| **p == f.grasp_class).count();
        correct += fold_correct;
        total += predictions.len();
        folds.push(FoldResult {
            accuracy: Accuracy::new(fold_correct, predictions.len()),
            split,
            csp,
            svm,
            train_features,
            test_features,
            predictions,
        });
    }
    Ok(EpochEvaluation { folds, accuracy: Accuracy::new(correct, total) })
}
