//! Proof-of-cooperative-learning consensus: four phases (Prepare, Train,
//! Synchronize, Commit) that elect a training oracle from published proofs
//! and adopt its update only with an honest-majority endorsement.

mod crypto;
mod message;
mod model;
mod round;
mod selection;
mod testset;

pub use crypto::{CryptoProvider, SimCrypto, SIGNATURE_LEN};
pub use message::{
    params_digest, params_from_bytes, params_to_bytes, ConsensusMessage, MessageKind, Payload,
};
pub use model::{CooperativeModel, SkillModel};
pub use round::{
    monte_carlo_success, write_log_jsonl, Behavior, ByzantineStrategy, LogEvent, Network,
    OracleNode, Phase, PoclConfig, RoundOutcome, RoundPlan,
};
pub use selection::{
    elect_trainer, election_order, next_streak, selection_score, Candidate, CooperativeProof,
};
pub use testset::{requests_digest, shared_test_set};
