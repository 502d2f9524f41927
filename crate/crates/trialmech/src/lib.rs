//! Incentive-compatible trial mechanisms and their verification machinery.
//!
//! The library models a trial that assigns treatments (arms) to agents whose
//! participation must be individually rational (BIR) and whose private-type
//! reports must be incentive compatible (BIC) under a shared Bayesian prior
//! over states. It provides:
//!
//! - the belief model and its valuation formulas ([`model`]);
//! - state-aware recommendation policies with exact BIR/BIC margin checks
//!   ([`incentives`]);
//! - the three sampling-floor benchmarks (closed form, LP, and convex
//!   type-frequency variant) with optimizing policies and certificates
//!   ([`benchmarks`]);
//! - state learning from warm-up data and sample-size formulas
//!   ([`learning`]);
//! - the two-stage trial mechanisms and mechanism-level incentive
//!   verification ([`mechanisms`]);
//! - inverse-propensity scoring with exact unbiasedness and variance
//!   machinery ([`estimation`]);
//! - stochastic and worst-case adversary constructions ([`adversaries`]);
//! - a seeded, reproducible experiment harness with CSV reporting
//!   ([`harness`]).
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `trialmech` binary for the command-line front end.

pub mod adversaries;
pub mod benchmarks;
pub mod cli;
mod error;
pub mod estimation;
pub mod harness;
pub mod incentives;
pub mod instance_file;
pub mod learning;
pub mod mechanisms;
pub mod model;
pub mod rng;
pub mod simplex;

pub use error::Error;
pub use model::{
    average_score, expected_utility, outside_option, AgentType, Instance, OutcomeSpace, Prior,
    ScoringFunction, State, TypeDistribution, UtilityStructure,
};
