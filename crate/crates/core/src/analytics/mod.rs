//! Closed-form consensus reliability, the PBFT comparison model, the
//! retrieval latency model, and the hit-rate monotonicity check.

mod latency;
mod lemma;
mod pbft;
mod reliability;

pub use latency::{
    latency_dlt, latency_don, latency_summary, total_latency, LatencyParams, LatencySummary,
};
pub use lemma::{lemma1_derivatives, verify_lemma1};
pub use pbft::{pbft_monte_carlo, pbft_success, PBFT_PHASES};
pub use reliability::{
    binomial_pmf, p_commit, p_failure, p_prepare, p_success, p_train_sync, ReliabilityParams,
};
