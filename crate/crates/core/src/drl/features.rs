//! Observations, agent histories and the per-action feature encoding.
//!
//! The agent network scores one action at a time: it maps a fixed-length
//! description of "what the cache gains and loses under this action" to a
//! scalar. Stacking those scalars over the legal actions gives the Q vector.

use std::collections::VecDeque;

use crate::cache::CachePool;
use crate::catalog::ContentId;

/// Width of a per-action feature vector.
pub const ACTION_FEATURES: usize = 16;
/// Width of the per-oracle slice of the mixer's global state.
pub const STATE_FEATURES: usize = 5;

pub type ActionFeatures = [f64; ACTION_FEATURES];

/// What one oracle sees when a request arrives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    /// Cache contents by slot, 0 for empty slots.
    pub cache: Vec<ContentId>,
    /// The current request followed by the pending ones, 0-padded.
    pub window: Vec<ContentId>,
    pub capacity: usize,
}

impl Observation {
    pub fn new(pool: &CachePool, requests: &[ContentId], index: usize, window: usize) -> Self {
        assert!(window >= 1, "window includes the current request");
        let mut w: Vec<ContentId> = requests[index..].iter().take(window).copied().collect();
        w.resize(window, 0);
        Self {
            cache: pool.snapshot(),
            window: w,
            capacity: pool.capacity(),
        }
    }

    pub fn request(&self) -> ContentId {
        self.window[0]
    }

    pub fn occupied(&self) -> usize {
        self.cache.iter().filter(|&&c| c != 0).count()
    }

    pub fn is_hit(&self) -> bool {
        let r = self.request();
        r != 0 && self.cache.contains(&r)
    }

    pub fn is_full(&self) -> bool {
        self.occupied() == self.capacity
    }

    /// 1 for "needed next", falling linearly to 1/W at the end of the
    /// window, 0 when not pending at all.
    fn closeness(&self, id: ContentId) -> f64 {
        let pending = &self.window[1..];
        match pending.iter().position(|&x| x == id) {
            Some(d) => 1.0 - d as f64 / pending.len() as f64,
            None => 0.0,
        }
    }

    fn pending_share(&self, id: ContentId) -> f64 {
        let pending = &self.window[1..];
        if pending.is_empty() {
            return 0.0;
        }
        pending.iter().filter(|&&x| x == id).count() as f64 / pending.len() as f64
    }
}

/// Legal actions: 0 is "keep / decline"; `j` evicts slot `j`. A hit admits
/// only 0, and so does a miss while a slot is free (0 fills it). A miss on a
/// full cache admits every action.
///
/// The environment itself accepts evictions from a non-full cache; they
/// are masked here because they only lower utilization.
pub fn action_mask(obs: &Observation) -> Vec<bool> {
    let open = !obs.is_hit() && obs.is_full();
    let mut mask = vec![open; obs.capacity + 1];
    mask[0] = true;
    mask
}

/// Rolling summary of an oracle's past requests and outcomes.
///
/// Keeps the last `horizon` request ids and their counts; the state update is
/// a fixed function of the episode prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentHistory {
    horizon: usize,
    recent: VecDeque<ContentId>,
    counts: Vec<u32>,
    prev_hit: bool,
    last_action: usize,
    steps: u64,
}

impl AgentHistory {
    pub fn new(horizon: usize, num_contents: u32) -> Self {
        assert!(horizon > 0);
        Self {
            horizon,
            recent: VecDeque::with_capacity(horizon),
            counts: vec![0; num_contents as usize + 1],
            prev_hit: false,
            last_action: 0,
            steps: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn prev_hit(&self) -> bool {
        self.prev_hit
    }

    pub fn last_action(&self) -> usize {
        self.last_action
    }

    pub fn push(&mut self, request: ContentId, hit: bool, action: usize) {
        if self.recent.len() == self.horizon {
            let old = self.recent.pop_front().expect("non-empty");
            self.counts[old as usize] -= 1;
        }
        self.recent.push_back(request);
        self.counts[request as usize] += 1;
        self.prev_hit = hit;
        self.last_action = action;
        self.steps += 1;
    }

    /// Share of the remembered requests that asked for `id`.
    pub fn frequency(&self, id: ContentId) -> f64 {
        if id == 0 || self.recent.is_empty() {
            return 0.0;
        }
        self.counts.get(id as usize).copied().unwrap_or(0) as f64 / self.recent.len() as f64
    }

    pub fn reset(&mut self) {
        self.recent.clear();
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.prev_hit = false;
        self.last_action = 0;
        self.steps = 0;
    }
}

fn item_features(obs: &Observation, hist: &AgentHistory, id: ContentId) -> [f64; 3] {
    if id == 0 {
        return [0.0; 3];
    }
    [hist.frequency(id), obs.closeness(id), obs.pending_share(id)]
}

/// Encode action `a` for this observation. Illegal actions still encode
/// (as if legal); callers filter with [`action_mask`].
pub fn action_features(obs: &Observation, hist: &AgentHistory, a: usize) -> ActionFeatures {
    let hit = obs.is_hit();
    let full = obs.is_full();
    let req = obs.request();
    let (added, removed) = if hit {
        (0, 0)
    } else if a == 0 {
        (if full { 0 } else { req }, 0)
    } else {
        (req, obs.cache[a - 1])
    };
    let add = item_features(obs, hist, added);
    let rem = item_features(obs, hist, removed);
    let s = state_features(obs, hist);
    let r = item_features(obs, hist, req);
    [
        (!hit && a == 0 && full) as u8 as f64,
        (!hit && a == 0 && !full) as u8 as f64,
        (!hit && a > 0) as u8 as f64,
        s[1],
        s[2],
        s[0],
        add[0],
        add[1],
        add[2],
        rem[0],
        rem[1],
        rem[2],
        s[3],
        s[4],
        r[0],
        r[1],
    ]
}

/// Action-independent summary used by the mixer:
/// `[fill, hit, prev_hit, cached frequency mass, mean cached closeness]`.
pub fn state_features(obs: &Observation, hist: &AgentHistory) -> [f64; STATE_FEATURES] {
    let cached = obs.cache.iter().filter(|&&c| c != 0);
    let (mut mass, mut close) = (0.0, 0.0);
    for &c in cached {
        mass += hist.frequency(c);
        close += obs.closeness(c);
    }
    [
        obs.occupied() as f64 / obs.capacity as f64,
        obs.is_hit() as u8 as f64,
        hist.prev_hit() as u8 as f64,
        mass,
        close / obs.capacity as f64,
    ]
}

/// Features of every legal action, paired with its index.
pub fn legal_action_features(
    obs: &Observation,
    hist: &AgentHistory,
) -> Vec<(usize, ActionFeatures)> {
    action_mask(obs)
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(a, _)| (a, action_features(obs, hist, a)))
        .collect()
}
