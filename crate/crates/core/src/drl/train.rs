//! Standalone training loop, greedy evaluation and the deployable policy.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cache::{CachePolicy, CachePool, EvictionDecision};
use crate::catalog::{CatalogConfig, ContentCatalog, ContentId};
use crate::drl::env::{CachingEnv, RewardParams};
use crate::drl::features::{
    action_features, legal_action_features, state_features, ActionFeatures, AgentHistory,
    Observation, STATE_FEATURES,
};
use crate::drl::learner::{
    explore, greedy_action, AgentTransition, LearnerParams, QmixLearner, ReplayBuffer, Transition,
};
use crate::drl::nn::MlpShape;
use crate::error::{config, Result};
use crate::rng;

/// Requests at the start of an evaluation stream that are not scored.
pub const DEFAULT_WARMUP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub oracles: usize,
    pub capacity: usize,
    pub num_contents: u32,
    pub alpha: f64,
    /// Joint steps (one request per oracle each) in a training episode.
    pub episode_len: usize,
    /// Total joint steps; the decision-level "time slots" of training.
    pub steps: u64,
    pub train_every: u64,
    /// Observation window: current request plus pending ones.
    pub window: usize,
    /// Request history remembered by each agent.
    pub horizon: usize,
    pub log_every: u64,
    /// 0 disables periodic evaluation.
    pub eval_every: u64,
    pub eval_requests: usize,
    pub learner: LearnerParams,
    pub reward: RewardParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            oracles: 4,
            capacity: 4,
            num_contents: 10,
            alpha: 1.0,
            episode_len: 5_000,
            steps: 10_000,
            train_every: 1,
            window: 10,
            horizon: 200,
            log_every: 100,
            eval_every: 1_000,
            eval_requests: 1_000,
            learner: LearnerParams::default(),
            reward: RewardParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        self.reward.validate()?;
        if self.oracles == 0 || self.capacity == 0 || self.num_contents == 0 {
            return Err(config(
                "oracles, capacity and catalog size must be positive",
            ));
        }
        if self.episode_len == 0 || self.window == 0 || self.horizon == 0 {
            return Err(config(
                "episode length, window and horizon must be positive",
            ));
        }
        if self.train_every == 0 || self.log_every == 0 {
            return Err(config("train_every and log_every must be positive"));
        }
        if self.eval_every > 0 && self.eval_requests <= DEFAULT_WARMUP {
            return Err(config(format!(
                "eval_requests must exceed the {DEFAULT_WARMUP}-request warm-up"
            )));
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<ContentCatalog> {
        ContentCatalog::new(&CatalogConfig {
            contents: self.num_contents,
            alpha: self.alpha,
            seed: self.seed,
            ..Default::default()
        })
    }

    /// Fixed evaluation streams, disjoint from every training episode.
    pub fn eval_streams(&self, catalog: &ContentCatalog) -> Vec<Vec<ContentId>> {
        (0..self.oracles as u32)
            .map(|m| {
                catalog
                    .generate_requests(m, u32::MAX, u64::MAX, self.eval_requests, self.seed)
                    .requests
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    /// Mean training loss since the previous row; NaN before the first update.
    pub loss: f64,
    pub epsilon: f64,
    pub eval_hit_rate: Option<f64>,
}

pub fn write_train_log<W: Write>(rows: &[TrainLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "loss", "epsilon", "eval_hit_rate"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.loss.to_string(),
            r.epsilon.to_string(),
            r.eval_hit_rate.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrainOutcome {
    pub learner: QmixLearner,
    pub log: Vec<TrainLogRow>,
    pub env_steps: u64,
}

fn episode_env(cfg: &TrainConfig, catalog: &ContentCatalog, episode: u64) -> Result<CachingEnv> {
    // Extra lookahead so the last step of an episode still has a next state.
    let len = cfg.episode_len + cfg.window;
    let seed = rng::derive_seed(cfg.seed, "train-requests", &[]);
    let streams = (0..cfg.oracles as u32)
        .map(|m| catalog.generate_requests(m, 0, episode, len, seed).requests)
        .collect();
    CachingEnv::new(
        &vec![cfg.capacity; cfg.oracles],
        cfg.num_contents,
        streams,
        cfg.window,
        cfg.horizon,
        cfg.reward,
    )
}

struct Decision {
    legal: Vec<Vec<(usize, ActionFeatures)>>,
    state: Vec<f64>,
}

fn decision_point(env: &CachingEnv) -> Decision {
    let mut legal = Vec::with_capacity(env.oracles());
    let mut state = Vec::new();
    for m in 0..env.oracles() {
        let obs = env.observation(m);
        let hist = env.history(m);
        legal.push(legal_action_features(&obs, hist));
        state.extend(state_features(&obs, hist));
    }
    Decision { legal, state }
}

/// Train from scratch. Deterministic in `cfg`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let learner = QmixLearner::new(
        cfg.learner.clone(),
        cfg.oracles,
        rng::derive_seed(cfg.seed, "learner", &[]),
    )?;
    train_from(cfg, learner, 0)
}

/// Continue training `learner` for `cfg.steps`, counting steps from `start`.
pub fn train_from(cfg: &TrainConfig, learner: QmixLearner, start: u64) -> Result<TrainOutcome> {
    let mut t = Trainer::new(cfg, learner, start)?;
    t.run(cfg.steps)?;
    Ok(t.finish())
}

/// Resumable training state: environment, replay memory and learner.
pub struct Trainer {
    cfg: TrainConfig,
    catalog: ContentCatalog,
    eval: Vec<Vec<ContentId>>,
    learner: QmixLearner,
    replay: ReplayBuffer,
    act_rng: crate::rng::SimRng,
    env: CachingEnv,
    here: Decision,
    episode: u64,
    step: u64,
    log: Vec<TrainLogRow>,
    loss_sum: f64,
    loss_n: u32,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, learner: QmixLearner, start: u64) -> Result<Self> {
        cfg.validate()?;
        if learner.agents() != cfg.oracles {
            return Err(config("learner was built for a different oracle count"));
        }
        let catalog = cfg.catalog()?;
        let episode = start / cfg.episode_len as u64;
        let env = episode_env(cfg, &catalog, episode)?;
        Ok(Self {
            eval: cfg.eval_streams(&catalog),
            replay: ReplayBuffer::new(cfg.learner.replay_capacity),
            act_rng: rng::stream(cfg.seed, "explore", &[start]),
            here: decision_point(&env),
            env,
            catalog,
            learner,
            episode,
            step: start,
            log: Vec::new(),
            loss_sum: 0.0,
            loss_n: 0,
            cfg: cfg.clone(),
        })
    }

    pub fn learner(&self) -> &QmixLearner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut QmixLearner {
        &mut self.learner
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn log(&self) -> &[TrainLogRow] {
        &self.log
    }

    /// Greedy hit rate on the fixed evaluation streams.
    pub fn evaluate(&self) -> Result<f64> {
        let c = &self.cfg;
        greedy_hit_rate(
            self.learner.agent_shape(),
            self.learner.agent_params(),
            &self.eval,
            c.capacity,
            c.num_contents,
            c.window,
            c.horizon,
            DEFAULT_WARMUP,
        )
    }

    /// Advance `steps` joint environment steps. Returns the mean training
    /// loss over them, if any update ran.
    pub fn run(&mut self, steps: u64) -> Result<Option<f64>> {
        let (mut sum, mut n) = (0.0, 0u32);
        let shape = self.learner.agent_shape().clone();
        let oracles = self.cfg.oracles;
        for _ in 0..steps {
            let step = self.step;
            let eps = self.cfg.learner.epsilon(step);
            let mut actions = Vec::with_capacity(oracles);
            let mut chosen = Vec::with_capacity(oracles);
            for m in 0..oracles {
                let obs = self.env.observation(m);
                let hist = self.env.history(m);
                let a = explore(
                    &shape,
                    self.learner.agent_params(),
                    &obs,
                    hist,
                    eps,
                    &mut self.act_rng,
                );
                chosen.push(action_features(&obs, hist, a));
                actions.push(a);
            }
            let outcome = self.env.step(&actions)?;
            let next = decision_point(&self.env);
            // While any cache is still filling, every action is forced and
            // the penalty is action-independent; such transitions only add
            // large, decision-free errors to the loss.
            let filling = self.here.state.chunks(STATE_FEATURES).any(|s| s[0] < 1.0);
            if !filling {
                self.replay.push(Transition {
                    agents: chosen
                        .into_iter()
                        .zip(&next.legal)
                        .map(|(c, legal)| AgentTransition {
                            chosen: c,
                            next: legal.iter().map(|(_, f)| *f).collect(),
                        })
                        .collect(),
                    state: std::mem::take(&mut self.here.state),
                    next_state: next.state.clone(),
                    reward: outcome.reward,
                    done: false,
                });
            }
            self.here = next;
            self.step += 1;

            if self.step % self.cfg.train_every == 0 {
                if let Some(l) = self.learner.train_step(&self.replay) {
                    self.loss_sum += l;
                    self.loss_n += 1;
                    sum += l;
                    n += 1;
                }
            }
            if self.step % self.cfg.episode_len as u64 == 0 {
                self.episode += 1;
                self.env = episode_env(&self.cfg, &self.catalog, self.episode)?;
                self.here = decision_point(&self.env);
            }
            if self.step % self.cfg.log_every == 0 {
                let evaluate = self.cfg.eval_every > 0 && self.step % self.cfg.eval_every == 0;
                let eval_hit_rate = if evaluate {
                    Some(self.evaluate()?)
                } else {
                    None
                };
                self.log.push(TrainLogRow {
                    step: self.step,
                    loss: if self.loss_n > 0 {
                        self.loss_sum / self.loss_n as f64
                    } else {
                        f64::NAN
                    },
                    epsilon: self.cfg.learner.epsilon(self.step),
                    eval_hit_rate,
                });
                self.loss_sum = 0.0;
                self.loss_n = 0;
            }
        }
        Ok((n > 0).then(|| sum / n as f64))
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            env_steps: self.step,
            learner: self.learner,
            log: self.log,
        }
    }
}

/// Greedy learned policy for one oracle, usable wherever a baseline is.
#[derive(Debug, Clone)]
pub struct DrlPolicy {
    shape: MlpShape,
    params: Vec<f64>,
    history: AgentHistory,
    window: usize,
}

impl DrlPolicy {
    pub fn new(
        shape: MlpShape,
        params: Vec<f64>,
        num_contents: u32,
        window: usize,
        horizon: usize,
    ) -> Self {
        assert_eq!(params.len(), shape.num_params());
        Self {
            shape,
            params,
            history: AgentHistory::new(horizon, num_contents),
            window,
        }
    }

    pub fn from_learner(
        learner: &QmixLearner,
        num_contents: u32,
        window: usize,
        horizon: usize,
    ) -> Self {
        Self::new(
            learner.agent_shape().clone(),
            learner.agent_params().to_vec(),
            num_contents,
            window,
            horizon,
        )
    }
}

impl CachePolicy for DrlPolicy {
    fn decide(
        &mut self,
        pool: &CachePool,
        requests: &[ContentId],
        index: usize,
        hit: bool,
    ) -> EvictionDecision {
        let a = if hit {
            0
        } else {
            let obs = Observation::new(pool, requests, index, self.window);
            greedy_action(&self.shape, &self.params, &obs, &self.history)
        };
        self.history.push(requests[index], hit, a);
        EvictionDecision::evict(index, a)
    }
}

/// Hit rate of the greedy policy over `streams[m][warmup..]`, every oracle
/// starting from an empty cache.
#[allow(clippy::too_many_arguments)]
pub fn greedy_hit_rate(
    shape: &MlpShape,
    params: &[f64],
    streams: &[Vec<ContentId>],
    capacity: usize,
    num_contents: u32,
    window: usize,
    horizon: usize,
    warmup: usize,
) -> Result<f64> {
    let (mut hits, mut total) = (0u64, 0u64);
    for stream in streams {
        let mut pool = CachePool::new(capacity, num_contents)?;
        let mut policy = DrlPolicy::new(
            shape.clone(),
            params.to_vec(),
            num_contents,
            window,
            horizon,
        );
        for (k, &id) in stream.iter().enumerate() {
            let hit = pool.probe(id)?;
            let d = policy.decide(&pool, stream, k, hit);
            if !hit {
                pool.apply_decision(id, d)?;
            }
            if k >= warmup {
                hits += hit as u64;
                total += 1;
            }
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    })
}

/// Parameters perturbed by uniform noise of the given amplitude.
pub fn perturb(params: &[f64], amplitude: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "perturb", &[]);
    params
        .iter()
        .map(|p| p + r.random_range(-amplitude..=amplitude))
        .collect()
}
