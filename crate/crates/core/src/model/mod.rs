//! Problem instances, policies, weight matrices and support-graph classification.

mod graph;
mod instance;
mod matrix;
mod policy;

pub use graph::{classify, instance_support_union, Classification};
pub use instance::{
    parse_instance, validate_instance, ActionRow, MdpInstance, RawInstance, RawReward,
    RawTransition, Validated, ValidationWarning, ROW_SUM_TOL,
};
pub use matrix::NonnegMatrix;
pub use policy::{policy_matrix, Policy, PolicyRow};

pub(crate) use instance::default_labels;

use thiserror::Error;

/// Errors raised while building or validating model objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("failed to parse instance: {0}")]
    Parse(String),
    #[error("instance has no states")]
    NoStates,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("row sum {sum} at ({state},{action})")]
    RowSum { state: usize, action: String, sum: f64 },
    #[error("state {state} has no available action")]
    EmptyActionSet { state: String },
    #[error("invalid reward {reward} at ({from},{action},{to})")]
    InvalidReward { from: usize, action: String, to: usize, reward: f64 },
    #[error("invalid probability {prob} at ({from},{action},{to})")]
    InvalidProbability { from: usize, action: String, to: usize, prob: f64 },
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("duplicate action label {0:?}")]
    DuplicateActionLabel(String),
    #[error("action {action} listed twice at state {state}")]
    DuplicateAction { state: usize, action: String },
    #[error("transition ({from},{action},{to}) listed twice")]
    DuplicateTransition { from: usize, action: String, to: usize },
    #[error("state index {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("matrix entry ({row},{col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("policy row {state}: {reason}")]
    InvalidPolicy { state: usize, reason: String },
}
