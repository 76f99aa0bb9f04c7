use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

use crate::solver::SolverResult;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // schema and records
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("record has {got} values but the schema has {expected} blocks")]
    ArityMismatch { expected: usize, got: usize },
    #[error("value {value} is outside the {cardinality} categories of block `{block}`")]
    UnknownCategory {
        block: String,
        value: u32,
        cardinality: usize,
    },
    #[error("block `{block}` does not have exactly one hot coordinate")]
    InvalidOneHot { block: String },
    #[error("point has {got} coordinates, expected {expected}")]
    InvalidPoint { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("marginal coordinate {coordinate} = {value} is not inside ({eta_min}, 1 - {eta_min})")]
    BoundaryMarginal {
        coordinate: usize,
        value: f64,
        eta_min: f64,
    },

    // prior
    #[error("tau must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("mixing weight C must lie in [0, 1], got {0}")]
    InvalidMixing(f64),
    #[error("reweighting cell (label {label}, group {group}) is empty while its counterpart is not")]
    EmptyCell { label: u32, group: u32 },
    #[error("schema has no {0} block")]
    MissingRole(&'static str),
    #[error("protected block `{0}` must take exactly two values for reweighting")]
    NonBinaryProtected(String),

    // oracles
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),
    #[error("domain of size {size} exceeds the enumeration limit {limit}")]
    DomainTooLarge { size: f64, limit: f64 },

    // solver
    #[error("eta must lie in (0, 0.5], got {0}")]
    InvalidEta(f64),
    #[error("C = 0 leaves the optimal dual unbounded")]
    UnboundedRadius,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "solver stopped after {} iterations with gradient norm {:e}",
        .0.iterations,
        .0.final_gradient_norm
    )]
    NotConverged(Box<SolverResult>),
    #[error("non-finite value encountered: {0}")]
    NumericalBreakdown(&'static str),
    #[error("box-constrained QP did not reach tolerance {tol:e} (gap {gap:e})")]
    QpNotConverged { gap: f64, tol: f64 },

    // sampler
    #[error("partial assignment is inconsistent with the schema: {0}")]
    InconsistentAssignment(String),
    #[error("block {0} is already assigned")]
    BlockAlreadyAssigned(usize),

    // metrics
    #[error("group {0} has zero probability mass")]
    ZeroGroupMass(u32),
    #[error("joint cell (label {label}, group {group}) has zero probability mass")]
    ZeroJointMass { label: u32, group: u32 },
    #[error("schemas do not match")]
    SchemaMismatch,
}
