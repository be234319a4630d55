//! Nearest-neighbour index strategies for contextual bandits on metric spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`](mod@env): synthetic environments with known mean fields, plus Monte Carlo
//!   diagnostics for their margin and dimension constants.
//! - [`knn`]: distance ordering of the reward history and per-arm prefix
//!   statistics (counts, sums, radii and means for every neighbourhood size).
//! - [`index`]: the uncertainty value, the k-NN UCB and k-NN KL-UCB indices and
//!   the Bernoulli KL divergence.
//! - [`policy`]: the generalised k-NN index strategy and context-free baselines.
//! - [`sim`]: the interaction loop, regret accounting and replication.
//! - [`concentration`]: log-MGF envelopes, Legendre transforms and a Monte Carlo
//!   harness for self-normalised tail bounds under predictable sampling.
//!
//! Arms are numbered from zero in the API. Output formats number them from one.

// Validation is written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod env;
mod error;
pub mod index;
pub mod knn;
pub mod policy;
pub mod rng;
pub mod sim;

pub use env::{Covariate, Environment, EnvironmentKind, EnvironmentSpec, NoiseModel, Round};
pub use error::{Error, Result};
pub use index::{IndexKind, IndexParams, Phi};
pub use knn::{History, HistoryEntry, NeighbourOrder, PrefixStats};
pub use policy::{Choice, DecisionTrace, KnnIndexPolicy, Policy, PolicyKind, PolicySpec};
pub use sim::{RoundRecord, RunConfig, RunSummary};
