//! Flat run configuration, loadable from TOML.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytics::{LatencyParams, ReliabilityParams};
use crate::cache::Baseline;
use crate::drl::{LearnerParams, MixerKind, RewardParams, TrainConfig};
use crate::error::{config, Error, Result};

/// Master seed. TOML integers stop at `i64::MAX`, so larger seeds are
/// written as decimal strings; `"paper"` names `2^64 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Seed(pub u64);

impl Seed {
    pub const PAPER: Seed = Seed(u64::MAX);
}

impl FromStr for Seed {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("paper") {
            return Ok(Seed::PAPER);
        }
        s.trim().parse().map(Seed).map_err(|_| {
            config(format!(
                "seed must be an unsigned integer or \"paper\", got {s:?}"
            ))
        })
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 <= i64::MAX as u64 {
            s.serialize_i64(self.0 as i64)
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Seed;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative integer, a decimal string or \"paper\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Seed, E> {
                u64::try_from(v)
                    .map(Seed)
                    .map_err(|_| E::custom("seed must be non-negative"))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Seed, E> {
                Ok(Seed(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Seed, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Consensus,
    Analytic,
    CacheBench,
    Train,
    Latency,
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consensus" => Ok(Scenario::Consensus),
            "analytic" => Ok(Scenario::Analytic),
            "cache-bench" => Ok(Scenario::CacheBench),
            "train" => Ok(Scenario::Train),
            "latency" => Ok(Scenario::Latency),
            other => Err(config(format!("unknown scenario {other:?}"))),
        }
    }
}

/// A caching policy in a benchmark: the learned one or a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Drl,
    Baseline(Baseline),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Drl,
        PolicyKind::Baseline(Baseline::Lfu),
        PolicyKind::Baseline(Baseline::Lru),
        PolicyKind::Baseline(Baseline::Random),
        PolicyKind::Baseline(Baseline::Fifo),
    ];
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Drl => f.write_str("DRL-DC"),
            PolicyKind::Baseline(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drl" | "drl-dc" => Ok(PolicyKind::Drl),
            other => other
                .parse()
                .map(PolicyKind::Baseline)
                .map_err(|_| config(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: Seed,
    /// Output directory.
    pub out: PathBuf,

    // Catalog.
    pub contents: u32,
    /// Popularity skew for training.
    pub alpha: f64,
    /// Skews swept by `cache-bench` and `latency`.
    pub alphas: Vec<f64>,

    // Caching network.
    pub oracles: usize,
    pub capacity: usize,
    pub requesters: u32,
    pub requests_per_requester: usize,
    pub slots: u64,
    pub policies: Vec<String>,
    /// Checkpoint path for DRL-DC; `{alpha}` expands to the skew.
    pub checkpoint: Option<String>,
    /// Width of the rolling hit-rate window, in requests.
    pub rolling_window: usize,
    /// Requests of the first slot excluded from evaluation hit rates.
    pub eval_start: usize,

    // Consensus.
    pub pf: f64,
    pub trials: usize,
    pub oracle_grid: Vec<usize>,
    pub pf_grid: Vec<f64>,
    /// Oracle counts for the analytic PoCL/PBFT comparison.
    pub pbft_grid: Vec<usize>,

    // Training.
    pub train_steps: u64,
    pub episode_len: usize,
    pub train_every: u64,
    pub window: usize,
    pub horizon: usize,
    pub log_every: u64,
    pub eval_every: u64,
    pub eval_requests: usize,
    pub gamma: f64,
    pub lr: f64,
    /// Invented default.
    pub batch: usize,
    /// Invented default.
    pub replay_capacity: usize,
    /// Invented default.
    pub target_sync: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_horizon: u64,
    pub hidden: usize,
    pub depth: usize,
    pub mixer: MixerKind,
    pub embed: usize,
    pub grad_clip: f64,
    pub reward_scale: f64,
    pub omega: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    /// Train inside consensus rounds, one train phase per slot.
    pub consensus_training: bool,
    pub steps_per_round: u64,

    // Latency.
    pub rate_kb_per_ms: f64,
    pub addressing_ms: f64,
    pub chunk_addressing_ms: f64,
    pub chunk_kb: f64,
    /// `[min_kb, max_kb]` content size bands.
    pub size_bands: Vec<[f64; 2]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let learner = LearnerParams::default();
        let reward = RewardParams::default();
        let train = TrainConfig::default();
        let latency = LatencyParams::default();
        Self {
            scenario: Scenario::CacheBench,
            seed: Seed(0),
            out: PathBuf::from("results"),
            contents: 10,
            alpha: 1.0,
            alphas: vec![0.5, 0.75, 1.0, 1.5],
            oracles: 4,
            capacity: 4,
            requesters: 10,
            requests_per_requester: 1000,
            slots: 1,
            policies: PolicyKind::ALL.iter().map(|p| p.to_string()).collect(),
            checkpoint: None,
            rolling_window: 100,
            eval_start: 200,
            pf: 0.1,
            trials: 10_000,
            oracle_grid: vec![10, 50, 100],
            pf_grid: vec![0.0, 0.1, 0.2, 0.3],
            pbft_grid: vec![10, 50, 100, 200, 300],
            train_steps: train.steps,
            episode_len: train.episode_len,
            train_every: train.train_every,
            window: train.window,
            horizon: train.horizon,
            log_every: train.log_every,
            eval_every: train.eval_every,
            eval_requests: train.eval_requests,
            gamma: learner.gamma,
            lr: learner.lr,
            batch: learner.batch,
            replay_capacity: learner.replay_capacity,
            target_sync: learner.target_sync,
            eps_start: learner.eps_start,
            eps_end: learner.eps_end,
            eps_horizon: learner.eps_horizon,
            hidden: learner.hidden,
            depth: learner.depth,
            mixer: learner.mixer,
            embed: learner.embed,
            grad_clip: learner.grad_clip,
            reward_scale: learner.reward_scale,
            omega: reward.omega,
            lambda: reward.lambda,
            mu: reward.mu,
            rho: reward.rho,
            consensus_training: false,
            steps_per_round: 500,
            rate_kb_per_ms: latency.rate_kb_per_ms,
            addressing_ms: latency.addressing_ms,
            chunk_addressing_ms: latency.chunk_addressing_ms,
            chunk_kb: latency.chunk_kb,
            size_bands: vec![[1.0, 256.0], [256.0, 1024.0], [1024.0, 10240.0]],
        }
    }
}

fn check_alpha(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(config(format!("alpha must be finite and >= 0, got {a}")));
    }
    Ok(())
}

fn check_pf(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(config(format!(
            "fault probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Reject anything that would violate a module invariant.
    pub fn validate(&self) -> Result<()> {
        if self.contents == 0 {
            return Err(config("contents must be positive"));
        }
        check_alpha(self.alpha)?;
        self.alphas.iter().try_for_each(|&a| check_alpha(a))?;
        if self.oracles == 0 || self.capacity == 0 || self.requesters == 0 {
            return Err(config("oracles, capacity and requesters must be positive"));
        }
        if self.requests_per_requester == 0 || self.slots == 0 {
            return Err(config("requests_per_requester and slots must be positive"));
        }
        self.policy_kinds()?;
        if self.rolling_window == 0 {
            return Err(config("rolling_window must be positive"));
        }
        if self.eval_start >= self.requesters as usize * self.requests_per_requester {
            return Err(config("eval_start must fall inside the first slot"));
        }
        check_pf(self.pf)?;
        self.pf_grid.iter().try_for_each(|&p| check_pf(p))?;
        if self.trials == 0 {
            return Err(config("trials must be positive"));
        }
        for &m in self.oracle_grid.iter().chain(&self.pbft_grid) {
            ReliabilityParams::for_oracles(m, self.pf).validate()?;
        }
        for band in &self.size_bands {
            if !(band[0] > 0.0) || !(band[1] >= band[0]) || !band[1].is_finite() {
                return Err(config(format!(
                    "size band {band:?} must satisfy 0 < min <= max"
                )));
            }
        }
        self.latency_params().validate()?;
        self.train_config(self.alpha).validate()?;
        if self.consensus_training && self.steps_per_round == 0 {
            return Err(config("steps_per_round must be positive"));
        }
        Ok(())
    }

    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>> {
        if self.policies.is_empty() {
            return Err(config("at least one policy is required"));
        }
        self.policies.iter().map(|p| p.parse()).collect()
    }

    pub fn latency_params(&self) -> LatencyParams {
        LatencyParams {
            rate_kb_per_ms: self.rate_kb_per_ms,
            addressing_ms: self.addressing_ms,
            chunk_addressing_ms: self.chunk_addressing_ms,
            chunk_kb: self.chunk_kb,
        }
    }

    pub fn learner_params(&self) -> LearnerParams {
        LearnerParams {
            gamma: self.gamma,
            lr: self.lr,
            batch: self.batch,
            replay_capacity: self.replay_capacity,
            target_sync: self.target_sync,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            eps_horizon: self.eps_horizon,
            hidden: self.hidden,
            depth: self.depth,
            mixer: self.mixer,
            embed: self.embed,
            grad_clip: self.grad_clip,
            reward_scale: self.reward_scale,
        }
    }

    pub fn train_config(&self, alpha: f64) -> TrainConfig {
        TrainConfig {
            oracles: self.oracles,
            capacity: self.capacity,
            num_contents: self.contents,
            alpha,
            episode_len: self.episode_len,
            steps: self.train_steps,
            train_every: self.train_every,
            window: self.window,
            horizon: self.horizon,
            log_every: self.log_every,
            eval_every: self.eval_every,
            eval_requests: self.eval_requests,
            learner: self.learner_params(),
            reward: RewardParams {
                omega: self.omega,
                lambda: self.lambda,
                mu: self.mu,
                rho: self.rho,
            },
            seed: self.seed.0,
        }
    }

    /// `checkpoint` with `{alpha}` expanded, relative paths left as given.
    pub fn checkpoint_path(&self, alpha: f64) -> Option<PathBuf> {
        self.checkpoint
            .as_ref()
            .map(|t| PathBuf::from(t.replace("{alpha}", &alpha.to_string())))
    }
}
