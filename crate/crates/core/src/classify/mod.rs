//! Linear SVM, evaluation splits and accuracy tables.

mod evaluate;
mod svm;
mod table;

pub use evaluate::{
    evaluate, evaluate_epochs, make_splits, Accuracy, EpochEvaluation, EvaluationConfig, EvaluationScheme,
    FoldResult, Split,
};
pub use svm::{kkt_residual, predict, train_svm, train_svm_with_tolerance, SvmModel, DEFAULT_TOLERANCE};
pub use table::{
    build_accuracy_table, recompute_means, round_half_away, AccuracyEntry, AccuracyTable, Column, SubjectAccuracies,
    SubjectRow, TableError,
};

use crate::csp::CspError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvmError {
    #[error("C must be a positive finite number, got {0}")]
    InvalidC(f64),
    #[error("{samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("expected {expected}-dimensional features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sample {index} has a non-finite feature")]
    NonFinite { index: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("solver stopped after {iterations} iterations with KKT violation {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("training part of fold {fold} holds a single class")]
    SingleClassFold { fold: usize },
    #[error("fold {fold} has no test samples")]
    EmptyTestSet { fold: usize },
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}
