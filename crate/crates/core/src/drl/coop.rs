//! The learned caching model as the workload of a consensus round.
//!
//! Parameters on the wire are the learner's full `θ` (agent network then
//! mixer). The cooperative proof scores the agent part on the shared test
//! set; honest training resumes the trainer-side [`Trainer`] from the
//! agreed parameters.

use crate::cache::{CachePolicy, CachePool};
use crate::catalog::ContentId;
use crate::drl::env::reward_of;
use crate::drl::learner::QmixLearner;
use crate::drl::train::{perturb, DrlPolicy, TrainConfig, Trainer};
use crate::error::Result;
use crate::pocl::CooperativeModel;
use crate::rng;

pub struct DrlCooperative {
    trainer: Trainer,
    cfg: TrainConfig,
    /// Environment steps the elected trainer runs per round.
    pub steps_per_round: u64,
    /// Amplitude of the noise a Byzantine trainer adds.
    pub degrade_amplitude: f64,
    /// Requests per oracle replayed to compute the reported reward.
    pub reward_requests: usize,
    last_loss: Option<f64>,
}

impl DrlCooperative {
    pub fn new(cfg: &TrainConfig, steps_per_round: u64) -> Result<Self> {
        let learner = QmixLearner::new(
            cfg.learner.clone(),
            cfg.oracles,
            rng::derive_seed(cfg.seed, "learner", &[]),
        )?;
        Ok(Self {
            trainer: Trainer::new(cfg, learner, 0)?,
            cfg: cfg.clone(),
            steps_per_round,
            degrade_amplitude: 1.0,
            reward_requests: 200,
            last_loss: None,
        })
    }

    pub fn initial_params(&self) -> Vec<f64> {
        self.trainer.learner().theta().to_vec()
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    /// Mean loss of the most recent honest training phase.
    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    fn policy(&self, params: &[f64]) -> DrlPolicy {
        let shape = self.trainer.learner().agent_shape().clone();
        let n = shape.num_params();
        DrlPolicy::new(
            shape,
            params[..n].to_vec(),
            self.cfg.num_contents,
            self.cfg.window,
            self.cfg.horizon,
        )
    }

    /// Greedy replay of `requests` from an empty cache; returns per-request
    /// hits and the summed per-request reward.
    fn replay(&self, params: &[f64], requests: &[ContentId]) -> (u32, f64) {
        let mut pool =
            CachePool::new(self.cfg.capacity, self.cfg.num_contents).expect("validated config");
        let mut policy = self.policy(params);
        let (mut hits, mut reward, mut prev) = (0u32, 0.0, 0.0);
        for (k, &id) in requests.iter().enumerate() {
            let hit = pool.probe(id).expect("catalog ids");
            let d = policy.decide(&pool, requests, k, hit);
            if !hit {
                pool.apply_decision(id, d).expect("masked action");
            }
            let h = hit as u8 as f64;
            reward += reward_of(h, prev, &pool.snapshot(), pool.capacity(), &self.cfg.reward)
                .expect("validated");
            prev = h;
            hits += hit as u32;
        }
        (hits, reward)
    }
}

impl CooperativeModel for DrlCooperative {
    fn test_hits(&self, params: &[f64], test_set: &[ContentId]) -> u32 {
        self.replay(params, test_set).0
    }

    fn reward(&self, oracle: u32, params: &[f64], slot: u64) -> f64 {
        let catalog = self.cfg.catalog().expect("validated config");
        let seed = rng::derive_seed(self.cfg.seed, "proof-reward", &[]);
        let requests = catalog
            .generate_requests(oracle, 0, slot, self.reward_requests, seed)
            .requests;
        self.replay(params, &requests).1
    }

    fn train(&mut self, _trainer: u32, params: &[f64], _pool: &[u32], _slot: u64) -> Vec<f64> {
        self.trainer
            .learner_mut()
            .set_theta(params)
            .expect("parameter length agreed by consensus");
        self.last_loss = self
            .trainer
            .run(self.steps_per_round)
            .expect("validated config");
        self.trainer.learner().theta().to_vec()
    }

    fn degrade(&self, params: &[f64], slot: u64) -> Vec<f64> {
        perturb(
            params,
            self.degrade_amplitude,
            rng::derive_seed(self.cfg.seed, "degrade", &[slot]),
        )
    }
}
