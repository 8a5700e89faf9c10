//! The joint caching environment: one step serves one request per oracle.

use serde::{Deserialize, Serialize};

use crate::cache::{CachePool, EvictionDecision};
use crate::catalog::ContentId;
use crate::drl::features::{AgentHistory, Observation};
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub omega: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            lambda: 1.0,
            mu: -1.0,
            rho: -1.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 1.0) || !self.omega.is_finite() {
            return Err(config(format!("omega must be >= 1, got {}", self.omega)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.mu <= 0.0) || !(self.rho <= 0.0) {
            return Err(config(format!(
                "mu and rho must be <= 0, got {} and {}",
                self.mu, self.rho
            )));
        }
        Ok(())
    }
}

/// Ordered pairs `(i, j)`, `i != j`, of occupied positions holding the same id.
pub fn duplicate_pairs(cache: &[ContentId]) -> usize {
    let occupied: Vec<ContentId> = cache.iter().copied().filter(|&c| c != 0).collect();
    let mut n = 0;
    for (i, a) in occupied.iter().enumerate() {
        for (j, b) in occupied.iter().enumerate() {
            if i != j && a == b {
                n += 1;
            }
        }
    }
    n
}

/// Per-oracle reward: hit-count change plus weighted constraint penalties.
/// `cache` lists the cached ids; zeros count as empty.
pub fn reward_of(
    hits_now: f64,
    hits_prev: f64,
    cache: &[ContentId],
    capacity: usize,
    params: &RewardParams,
) -> Result<f64> {
    params.validate()?;
    let xi1 = duplicate_pairs(cache) as f64;
    let used = cache.iter().filter(|&&c| c != 0).count() as f64;
    let xi2 = (used - capacity as f64).powi(2);
    Ok(
        params.omega * (hits_now - hits_prev)
            + params.lambda * (params.mu * xi1 + params.rho * xi2),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub hits: Vec<bool>,
    /// Sum of `rewards`.
    pub reward: f64,
}

/// `M` cache pools replaying their own request streams in lockstep.
#[derive(Debug, Clone)]
pub struct CachingEnv {
    pools: Vec<CachePool>,
    requests: Vec<Vec<ContentId>>,
    histories: Vec<AgentHistory>,
    prev_hits: Vec<f64>,
    index: usize,
    window: usize,
    reward: RewardParams,
}

impl CachingEnv {
    /// Streams must share one length; pools start empty.
    pub fn new(
        capacities: &[usize],
        num_contents: u32,
        requests: Vec<Vec<ContentId>>,
        window: usize,
        horizon: usize,
        reward: RewardParams,
    ) -> Result<Self> {
        reward.validate()?;
        if capacities.is_empty() || capacities.len() != requests.len() {
            return Err(config("need one request stream per oracle"));
        }
        if requests.iter().any(|r| r.len() != requests[0].len()) {
            return Err(config("request streams must have equal length"));
        }
        if window == 0 || horizon == 0 {
            return Err(config("window and horizon must be positive"));
        }
        let pools = capacities
            .iter()
            .map(|&c| CachePool::new(c, num_contents))
            .collect::<Result<Vec<_>>>()?;
        for stream in &requests {
            for &id in stream {
                if id == 0 || id > num_contents {
                    return Err(Error::UnknownContent { id, num_contents });
                }
            }
        }
        Ok(Self {
            histories: vec![AgentHistory::new(horizon, num_contents); pools.len()],
            prev_hits: vec![0.0; pools.len()],
            pools,
            requests,
            index: 0,
            window,
            reward,
        })
    }

    pub fn oracles(&self) -> usize {
        self.pools.len()
    }

    pub fn len(&self) -> usize {
        self.requests[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn done(&self) -> bool {
        self.index >= self.len()
    }

    pub fn pools(&self) -> &[CachePool] {
        &self.pools
    }

    pub fn history(&self, m: usize) -> &AgentHistory {
        &self.histories[m]
    }

    pub fn observation(&self, m: usize) -> Observation {
        Observation::new(&self.pools[m], &self.requests[m], self.index, self.window)
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.oracles()).map(|m| self.observation(m)).collect()
    }

    /// Serve the current request of every oracle under `actions`.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if self.done() {
            return Err(Error::Domain("episode is over".into()));
        }
        if actions.len() != self.oracles() {
            return Err(Error::Domain(format!(
                "expected {} actions, got {}",
                self.oracles(),
                actions.len()
            )));
        }
        for (m, &a) in actions.iter().enumerate() {
            let max = self.pools[m].capacity();
            if a > max {
                return Err(Error::InvalidAction {
                    oracle: m,
                    action: a,
                    max,
                });
            }
        }
        // Validate every action before touching any pool so a failed step
        // leaves the environment unchanged.
        for (m, &a) in actions.iter().enumerate() {
            let pool = &self.pools[m];
            let id = self.requests[m][self.index];
            if !pool.contains(id) && a > 0 && pool.slot(a).is_none() {
                return Err(Error::InvalidAction {
                    oracle: m,
                    action: a,
                    max: pool.capacity(),
                });
            }
        }
        let mut rewards = Vec::with_capacity(self.oracles());
        let mut hits = Vec::with_capacity(self.oracles());
        for (m, &a) in actions.iter().enumerate() {
            let id = self.requests[m][self.index];
            let pool = &mut self.pools[m];
            let hit = pool.probe(id)?;
            if !hit {
                pool.apply_decision(id, EvictionDecision::evict(self.index, a))?;
            }
            let h = hit as u8 as f64;
            rewards.push(reward_of(
                h,
                self.prev_hits[m],
                &pool.snapshot(),
                pool.capacity(),
                &self.reward,
            )?);
            self.prev_hits[m] = h;
            self.histories[m].push(id, hit, if hit { 0 } else { a });
            hits.push(hit);
        }
        self.index += 1;
        let reward = rewards.iter().sum();
        Ok(StepOutcome {
            rewards,
            hits,
            reward,
        })
    }
}
