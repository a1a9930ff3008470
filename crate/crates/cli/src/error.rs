use std::io;
use std::path::{Path, PathBuf};

use graspdec_core::classify::{EvalError, SvmError};
use graspdec_core::csp::CspError;
use graspdec_core::model::ValidationReport;
use graspdec_core::pipeline::PipelineError;
use graspdec_core::simulate::SimulationError;
use graspdec_core::topomap::TopomapError;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config, malformed input files.
    #[error("{0}")]
    Input(String),
    #[error("{}", describe_report(.0))]
    Validation(ValidationReport),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Solver non-convergence or a numerically singular fit.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Validation(_) => EXIT_INPUT,
            CliError::Io { .. } => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

fn describe_report(report: &ValidationReport) -> String {
    let mut lines = vec![format!("recording failed validation ({} problems)", report.errors().count())];
    lines.extend(report.errors().map(|v| format!("  - {v}")));
    lines.join("\n")
}

fn is_numerical(err: &EvalError) -> bool {
    matches!(
        err,
        EvalError::Svm(SvmError::NotConverged { .. })
            | EvalError::Csp(CspError::NotPositiveDefinite | CspError::SingularProjection)
    )
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::Validation(report) => CliError::Validation(report),
            PipelineError::Evaluation { ref source, .. } if is_numerical(source) => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(err: SimulationError) -> Self {
        CliError::Input(err.to_string())
    }
}

impl From<TopomapError> for CliError {
    fn from(err: TopomapError) -> Self {
        match err {
            TopomapError::NonFinite => CliError::Numerical(err.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}
