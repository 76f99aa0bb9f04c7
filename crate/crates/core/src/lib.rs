//! Maximum-entropy distributions over discrete product domains with
//! fairness-adjusted priors.
//!
//! The pipeline this crate supports:
//!
//! 1. Describe the domain with a [`DomainSchema`] (binary bits and one-hot
//!    categorical blocks, tagged as feature / label / protected) and load
//!    records into a [`Dataset`].
//! 2. Reweight the dataset so that the protected groups have a controlled
//!    statistical rate ([`reweight`]) and mix the result with the uniform
//!    distribution ([`mix_prior`]) to get a prior with full support.
//! 3. Pick a target marginal vector ([`target_marginal`]) and minimize the
//!    convex dual objective ([`solve`]). The dual oracles in [`oracle`]
//!    evaluate the objective, gradient and Hessian in time polynomial in the
//!    number of coordinates and data points, never touching the full domain.
//! 4. Evaluate, marginalize and sample the resulting Gibbs distribution
//!    exactly through restricted partition sums ([`sampler`]) and measure
//!    representation rate, statistical rate and closeness ([`metrics`]).
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command
//! line live in the companion `maxent-debias` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod domain;
pub mod error;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod prior;
pub mod qp;
pub mod sampler;
pub mod solver;

pub use domain::{
    decode_point, empirical_marginal, encode_record, validate_interior, AttributeBlock, BlockKind,
    DataPoint, Dataset, DomainSchema, Role, DEFAULT_ETA_MIN,
};
pub use error::{Error, Result};
pub use metrics::{FairnessBound, FairnessReport, GroupTable, ReportSource};
pub use oracle::{brute_force_dual, dual_gradient, dual_hessian, dual_value, DualEvaluation};
pub use prior::{mix_prior, prior_mass, reweight, MixedPrior, ReweightedDistribution};
pub use qp::inner_qp_solve;
pub use sampler::{sample_dataset, sample_point, sample_points, PartialAssignment, Sampler};
pub use solver::{
    bounding_radius, solve, target_marginal, MarginalKind, MaxEntModel, SolverConfig, SolverMode,
    SolverResult,
};
