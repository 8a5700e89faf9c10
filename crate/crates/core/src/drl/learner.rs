//! Replay memory and the value-decomposition learner.
//!
//! `θ` is one flat vector: the shared agent network followed by the mixer.
//! Every oracle evaluates the same agent network on its own features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drl::features::{
    action_mask, legal_action_features, ActionFeatures, AgentHistory, Observation, ACTION_FEATURES,
};
use crate::drl::mixer::{Mixer, MixerKind};
use crate::drl::nn::{clip_norm, Adam, MlpShape, MlpTrace};
use crate::error::{config, Result};
use crate::rng::{self, SimRng};

/// Replay capacity, batch and sync period are invented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerParams {
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub replay_capacity: usize,
    pub target_sync: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Steps over which epsilon decays linearly; flat afterwards.
    pub eps_horizon: u64,
    pub hidden: usize,
    pub depth: usize,
    pub mixer: MixerKind,
    pub embed: usize,
    pub grad_clip: f64,
    /// Multiplies rewards inside the TD target only; `1/(1-γ)` at the
    /// default `γ` keeps per-step gaps on the scale of the return.
    pub reward_scale: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-3,
            batch: 32,
            replay_capacity: 10_000,
            target_sync: 200,
            eps_start: 0.9,
            eps_end: 0.05,
            eps_horizon: 10_000,
            hidden: 32,
            depth: 2,
            mixer: MixerKind::Qmix,
            embed: 8,
            grad_clip: 10.0,
            reward_scale: 100.0,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(config("learning rate must be positive"));
        }
        if self.batch == 0 || self.batch > self.replay_capacity {
            return Err(config(format!(
                "batch {} must be in 1..=replay capacity {}",
                self.batch, self.replay_capacity
            )));
        }
        if self.target_sync == 0 {
            return Err(config("target sync period must be positive"));
        }
        for e in [self.eps_start, self.eps_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(config(format!("epsilon {e} outside [0, 1]")));
            }
        }
        if self.hidden == 0 || self.hidden > 64 || !(1..=2).contains(&self.depth) {
            return Err(config(
                "agent network must have 1-2 hidden layers of 1-64 units",
            ));
        }
        if self.mixer == MixerKind::Qmix && self.embed == 0 {
            return Err(config("mixer embedding must be positive"));
        }
        if !(self.grad_clip > 0.0) || !(self.reward_scale > 0.0) {
            return Err(config("grad_clip and reward_scale must be positive"));
        }
        Ok(())
    }

    /// Linear decay from `eps_start` at step 0 to `eps_end` at the horizon.
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.eps_horizon {
            return self.eps_end;
        }
        let frac = step as f64 / self.eps_horizon as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }

    pub fn agent_shape(&self) -> MlpShape {
        let mut sizes = vec![ACTION_FEATURES];
        sizes.extend(std::iter::repeat(self.hidden).take(self.depth));
        sizes.push(1);
        MlpShape::new(sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTransition {
    pub chosen: ActionFeatures,
    /// Features of every legal action at the next decision point.
    pub next: Vec<ActionFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub agents: Vec<AgentTransition>,
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut SimRng) -> Vec<&'a Transition> {
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Index of the largest value, lowest index on ties. `None` for empty input.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct QmixLearner {
    pub params: LearnerParams,
    agent: MlpShape,
    mixer: Mixer,
    theta: Vec<f64>,
    target: Vec<f64>,
    adam: Adam,
    rng: SimRng,
    updates: u64,
}

impl QmixLearner {
    pub fn new(params: LearnerParams, agents: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        let agent = params.agent_shape();
        let mixer = Mixer::new(
            params.mixer,
            agents,
            agents * crate::drl::features::STATE_FEATURES,
            params.embed,
        );
        let mut init = rng::stream(seed, "learner-init", &[]);
        let mut theta = agent.init(&mut init);
        theta.extend(mixer.init(&mut init));
        let n = theta.len();
        Ok(Self {
            agent,
            mixer,
            target: theta.clone(),
            theta,
            adam: Adam::new(n, params.lr),
            rng: rng::stream(seed, "learner-batches", &[]),
            updates: 0,
            params,
        })
    }

    pub fn agents(&self) -> usize {
        self.mixer.agents
    }

    pub fn agent_shape(&self) -> &MlpShape {
        &self.agent
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn rng(&self) -> &SimRng {
        &self.rng
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn agent_params(&self) -> &[f64] {
        &self.theta[..self.agent.num_params()]
    }

    /// Replace both networks, e.g. with parameters adopted by consensus.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(config(format!(
                "expected {} parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        self.theta.copy_from_slice(theta);
        self.target.copy_from_slice(theta);
        Ok(())
    }

    /// Restore every piece of mutable state at once (checkpoint load).
    pub(crate) fn restore(
        &mut self,
        theta: Vec<f64>,
        target: Vec<f64>,
        adam: Adam,
        rng: SimRng,
        updates: u64,
    ) {
        self.theta = theta;
        self.target = target;
        self.adam = adam;
        self.rng = rng;
        self.updates = updates;
    }

    /// Zero the agent's output layer; every Q value becomes 0.
    pub fn zero_agent_output(&mut self) {
        let n = self.agent.num_params();
        self.agent.zero_output_layer(&mut self.theta[..n]);
        self.target.copy_from_slice(&self.theta);
    }

    pub fn q_values(&self, obs: &Observation, hist: &AgentHistory) -> Vec<f64> {
        agent_q_values(&self.agent, self.agent_params(), obs, hist)
    }

    pub fn greedy(&self, obs: &Observation, hist: &AgentHistory) -> usize {
        greedy_action(&self.agent, self.agent_params(), obs, hist)
    }

    pub fn mix(&self, qs: &[f64], state: &[f64]) -> f64 {
        self.mixer
            .forward(&self.theta[self.agent.num_params()..], qs, state)
    }

    fn td_target(&self, t: &Transition) -> f64 {
        let r = self.params.reward_scale * t.reward;
        if t.done || self.params.gamma == 0.0 {
            return r;
        }
        let n = self.agent.num_params();
        let (agent, mixer) = self.target.split_at(n);
        let best: Vec<f64> = t
            .agents
            .iter()
            .map(|a| {
                a.next
                    .iter()
                    .map(|f| self.agent.forward(agent, f)[0])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        r + self.params.gamma * self.mixer.forward(mixer, &best, &t.next_state)
    }

    /// `Σ_i (y_i − Q_tot,i)²` at parameters `theta`, targets from `θ′`.
    pub fn loss_at(&self, theta: &[f64], batch: &[&Transition]) -> f64 {
        let n = self.agent.num_params();
        batch
            .iter()
            .map(|t| {
                let qs: Vec<f64> = t
                    .agents
                    .iter()
                    .map(|a| self.agent.forward(&theta[..n], &a.chosen)[0])
                    .collect();
                let d = self.td_target(t) - self.mixer.forward(&theta[n..], &qs, &t.state);
                d * d
            })
            .sum()
    }

    /// Loss at `theta` with its gradient accumulated into `grad`.
    pub fn loss_and_grad(&self, theta: &[f64], batch: &[&Transition], grad: &mut [f64]) -> f64 {
        let n = self.agent.num_params();
        let (agent, mixer) = theta.split_at(n);
        let mut loss = 0.0;
        let mut traces = vec![MlpTrace::default(); self.agents()];
        for t in batch {
            let y = self.td_target(t);
            let qs: Vec<f64> = t
                .agents
                .iter()
                .zip(traces.iter_mut())
                .map(|(a, tr)| self.agent.forward_traced(agent, &a.chosen, tr)[0])
                .collect();
            let q_tot = self.mixer.forward(mixer, &qs, &t.state);
            let d = y - q_tot;
            loss += d * d;
            let dq = self
                .mixer
                .backward(mixer, &qs, &t.state, -2.0 * d, &mut grad[n..]);
            for (tr, &g) in traces.iter().zip(&dq) {
                self.agent.backward(agent, tr, &[g], &mut grad[..n]);
            }
        }
        loss
    }

    /// One gradient step on a sampled batch. `None` while the buffer holds
    /// fewer than `batch` transitions.
    pub fn train_step(&mut self, replay: &ReplayBuffer) -> Option<f64> {
        if replay.len() < self.params.batch {
            return None;
        }
        let batch = replay.sample(self.params.batch, &mut self.rng);
        Some(self.train_on(&batch))
    }

    /// One gradient step on a fixed batch; returns the pre-update loss.
    pub fn train_on(&mut self, batch: &[&Transition]) -> f64 {
        let mut grad = vec![0.0; self.theta.len()];
        let loss = self.loss_and_grad(&self.theta, batch, &mut grad);
        clip_norm(&mut grad, self.params.grad_clip);
        self.adam.step(&mut self.theta, &grad);
        self.updates += 1;
        if self.updates % self.params.target_sync == 0 {
            self.target.copy_from_slice(&self.theta);
        }
        loss
    }
}

/// Q vector of length `C + 1`; illegal actions are scored as if legal.
pub fn agent_q_values(
    shape: &MlpShape,
    params: &[f64],
    obs: &Observation,
    hist: &AgentHistory,
) -> Vec<f64> {
    (0..=obs.capacity)
        .map(|a| shape.forward(params, &crate::drl::features::action_features(obs, hist, a))[0])
        .collect()
}

/// Best legal action, lowest index on ties.
pub fn greedy_action(
    shape: &MlpShape,
    params: &[f64],
    obs: &Observation,
    hist: &AgentHistory,
) -> usize {
    let legal = legal_action_features(obs, hist);
    let qs: Vec<f64> = legal
        .iter()
        .map(|(_, f)| shape.forward(params, f)[0])
        .collect();
    legal[argmax(&qs).expect("action 0 is always legal")].0
}

/// Epsilon-greedy over the legal actions.
pub fn explore(
    shape: &MlpShape,
    params: &[f64],
    obs: &Observation,
    hist: &AgentHistory,
    eps: f64,
    rng: &mut SimRng,
) -> usize {
    if rng.random::<f64>() < eps {
        let legal: Vec<usize> = action_mask(obs)
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(a, _)| a)
            .collect();
        legal[rng.random_range(0..legal.len())]
    } else {
        greedy_action(shape, params, obs, hist)
    }
}
