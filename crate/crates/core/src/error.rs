use thiserror::Error;

use crate::tree::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree spec: {0}")]
    InvalidSpec(String),

    #[error("measure {value} at {location} is not a finite positive number")]
    NonPositiveMeasure { location: String, value: f64 },

    #[error("children of {location} sum to {children_sum}, but the declared measure is {declared}")]
    MeasureMismatch {
        location: String,
        declared: f64,
        children_sum: f64,
    },

    #[error("node {0} is not in the tree")]
    UnknownNode(NodeId),

    #[error("node {0} is a leaf")]
    LeafNode(NodeId),

    #[error("level {level} out of range (tree depth is {depth})")]
    LevelOutOfRange { level: u32, depth: u32 },

    #[error("operands live on different trees")]
    TreeMismatch,

    #[error("expected {expected} leaf values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} for node {node}")]
    NonFinite { node: NodeId, value: f64 },

    #[error("coefficient {value} at node {node} exceeds 1 in absolute value")]
    CoefficientOutOfRange { node: NodeId, value: f64 },

    #[error("weight must be strictly positive, found {value} at leaf {leaf}")]
    NonPositiveWeight { leaf: usize, value: f64 },

    #[error("b at node {node} is not in the difference space of that node: {reason}")]
    NotADifference { node: NodeId, reason: String },

    #[error("Carleson normalization violated: norm {0} > 1")]
    CarlesonViolation(f64),

    #[error("exponent p = {0} must exceed 1")]
    InvalidExponent(f64),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
