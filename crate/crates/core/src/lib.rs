//! Deterministic simulator for trust-aware cooperative caching across a
//! network of oracles.
//!
//! * [`catalog`]: Zipf content universe and replayable request streams.
//! * [`cache`]: bounded cache pools, hit accounting, classical baselines.
//! * [`drl`]: the cooperative caching environment and value-decomposition learner.
//! * [`pocl`]: the four-phase learning consensus with fault injection.
//! * [`analytics`]: closed-form success rates, a PBFT baseline, latency model.
//! * [`harness`]: run configuration and scenario drivers used by the CLI.

// Parameter validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cache;
pub mod catalog;
pub mod drl;
pub mod error;
pub mod harness;
pub mod pocl;
pub mod rng;

pub use error::{Error, Result};
