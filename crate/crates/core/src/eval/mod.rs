//! Splits, classification reports, the experiment matrix and A/B aggregation.

pub mod ab;
pub mod matrix;
pub mod report;
pub mod split;

pub use ab::{ab_summary, parse_survey_results, AbSummary, Arm, ArmSummary, SurveyResult, MAX_RATING};
pub use matrix::{
    render_accuracy_table, render_matrix_jsonl, render_matrix_table, run_experiment_matrix,
    EvalMode, ExperimentSpec, MatrixConfig, MatrixData, MatrixRow, THREE_CLASSES,
};
pub use report::{
    classification_report, classification_report_for, f_score, format_percent, round_percent,
    ClassMetrics, ClassificationReport, WeightedMetrics,
};
pub use split::{split, SplitSpec};

use crate::label::SentimentLabel;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown model kind '{0}'")]
    UnknownModelKind(String),
    #[error("experiment {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("class {} has {count} record(s); a stratified split needs at least 2", .label.display_name())]
    TooFewRecords { label: SentimentLabel, count: usize },
    #[error("no survey results for arm {0}")]
    EmptyArm(Arm),
    #[error("rating {0} is outside 0..=5")]
    InvalidRating(u8),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
