//! Exponential-family random graph models for networks whose ties are counts.
//!
//! Models are specified as an ordered list of statistics plus a reference
//! measure (Poisson or geometric), simulated by Metropolis–Hastings and fitted
//! by Monte Carlo maximum likelihood or stochastic-approximation method of
//! moments.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod network;
pub mod sampler;
pub mod special;
pub mod terms;

pub use error::{Error, Result};
pub use inference::{mcmc_mle, mom_fit, monte_carlo_test, FitControl, FitResult, FitStatus};
pub use network::{CountNetwork, NodeAttributes, Summary};
pub use sampler::{sample, SampleBatch, SamplerControl};
pub use terms::{
    eval_stats, ActorSet, Affect, Combine, Constraint, Covariate, Direction, Model, ModelSpec,
    Reference, StatVector, TermKind, TermSpec, TwoPath,
};
