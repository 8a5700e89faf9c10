//! Cooperative caching as a decentralized multi-agent problem, solved with
//! per-oracle Q networks combined through a monotone mixing network.

pub mod checkpoint;
pub mod coop;
pub mod env;
pub mod features;
pub mod igm;
pub mod learner;
pub mod mixer;
pub mod nn;
pub mod train;

pub use coop::DrlCooperative;
pub use env::{duplicate_pairs, reward_of, CachingEnv, RewardParams, StepOutcome};
pub use features::{
    action_features, action_mask, state_features, ActionFeatures, AgentHistory, Observation,
    ACTION_FEATURES, STATE_FEATURES,
};
pub use igm::{verify_igm_consistency, verify_igm_on_instance, TinyInstance};
pub use learner::{argmax, AgentTransition, LearnerParams, QmixLearner, ReplayBuffer, Transition};
pub use mixer::{Mixer, MixerKind};
pub use train::{
    greedy_hit_rate, perturb, train, train_from, write_train_log, DrlPolicy, TrainConfig,
    TrainLogRow, TrainOutcome, Trainer, DEFAULT_WARMUP,
};
