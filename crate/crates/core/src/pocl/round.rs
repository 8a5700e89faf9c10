use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::crypto::{CryptoProvider, SimCrypto, SIGNATURE_LEN};
use super::message::{
    params_digest, params_from_bytes, params_to_bytes, ConsensusMessage, Payload,
};
use super::model::{CooperativeModel, SkillModel};
use super::selection::{election_order, next_streak, Candidate, CooperativeProof};
use super::testset::shared_test_set;
use crate::analytics::ReliabilityParams;
use crate::catalog::ContentId;
use crate::error::{domain, Result};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Behavior {
    Honest,
    Byzantine,
    /// Crashed before the round; sends nothing.
    Faulty,
}

/// What a Byzantine oracle does. Oracles never equivocate: every peer sees
/// the same broadcast.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByzantineStrategy {
    /// Publish an outlying proof instead of the true one.
    pub falsify_proof: bool,
    /// As trainer, publish a degraded update.
    pub degrade_update: bool,
    /// Invert every COMMIT vote.
    pub false_vote: bool,
    /// Stamp PREPARE with the wrong slot.
    pub stale_slot: bool,
    /// Attach garbage signatures.
    pub forge_signature: bool,
}

impl ByzantineStrategy {
    pub fn standard() -> Self {
        Self {
            falsify_proof: true,
            degrade_update: true,
            false_vote: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoclConfig {
    pub beta: f64,
    pub t_pre: u64,
    pub t_tra: u64,
    /// Broadcast delays are uniform on `1..=max_delay` ticks.
    pub max_delay: u64,
    pub train_ticks: u64,
    pub test_set_size: usize,
    pub byzantine: usize,
    pub fault_budget: usize,
    pub p_fail: f64,
    pub strategy: ByzantineStrategy,
}

impl Default for PoclConfig {
    fn default() -> Self {
        Self::for_oracles(4, 0.0)
    }
}

impl PoclConfig {
    pub fn for_oracles(oracles: usize, p_fail: f64) -> Self {
        Self::from_reliability(&ReliabilityParams::for_oracles(oracles, p_fail))
    }

    pub fn from_reliability(params: &ReliabilityParams) -> Self {
        Self {
            beta: 0.9,
            t_pre: 100,
            t_tra: 100_000,
            max_delay: 10,
            train_ticks: 1_000,
            test_set_size: 200,
            byzantine: params.byzantine,
            fault_budget: params.fault_budget,
            p_fail: params.p_fail,
            strategy: ByzantineStrategy::standard(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(domain(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(domain(format!(
                "P_f must lie in [0, 1], got {}",
                self.p_fail
            )));
        }
        if self.t_pre == 0 || self.t_tra == 0 || self.max_delay == 0 {
            return Err(domain("tick budgets and max delay must be positive"));
        }
        if self.train_ticks > self.t_tra {
            return Err(domain("training ticks exceed the train-phase budget"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Prepare,
    Train,
    Sync,
    Commit,
    Done,
    Failed,
}

/// Per-round fault injection on top of the random process.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlan {
    /// Apply the `P_f` process at each phase boundary.
    pub random_faults: bool,
    /// Deterministic crashes: oracle crashes on entering the phase. A `Train`
    /// crash only bites if the oracle is asked to train.
    pub crashes: Vec<(u32, Phase)>,
    /// Put this pool member first in the election order.
    pub force_trainer: Option<u32>,
}

impl Default for RoundPlan {
    fn default() -> Self {
        Self {
            random_faults: true,
            crashes: Vec::new(),
            force_trainer: None,
        }
    }
}

impl RoundPlan {
    pub fn quiet() -> Self {
        Self {
            random_faults: false,
            ..Self::default()
        }
    }

    fn crashes_at(&self, oracle: u32, phase: Phase) -> bool {
        self.crashes.contains(&(oracle, phase))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleNode {
    pub id: u32,
    pub behavior: Behavior,
    pub params: Vec<f64>,
    pub streak: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub slot: u64,
    pub phase: Phase,
    pub event: String,
    pub sender: Option<u32>,
    pub outcome: Option<String>,
}

pub fn write_log_jsonl<W: Write>(events: &[LogEvent], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub slot: u64,
    pub success: bool,
    pub phase: Phase,
    pub failure: Option<String>,
    pub pool: Vec<u32>,
    pub trainer: Option<u32>,
    pub trainer_byzantine: bool,
    pub re_elections: usize,
    pub prepare_failures: usize,
    pub train_failures: usize,
    pub commit_failures: usize,
    pub valid_commits: usize,
    pub true_votes: usize,
    pub false_votes: usize,
    /// Oracles that replaced their parameters with the update.
    pub adopted: Vec<u32>,
    /// Honest voters whose test hits would drop under the update.
    pub honest_regressions: usize,
    pub ticks: u64,
}

impl RoundOutcome {
    fn new(slot: u64) -> Self {
        Self {
            slot,
            success: false,
            phase: Phase::Prepare,
            failure: None,
            pool: Vec::new(),
            trainer: None,
            trainer_byzantine: false,
            re_elections: 0,
            prepare_failures: 0,
            train_failures: 0,
            commit_failures: 0,
            valid_commits: 0,
            true_votes: 0,
            false_votes: 0,
            adopted: Vec::new(),
            honest_regressions: 0,
            ticks: 0,
        }
    }
}

/// All oracles plus the shared model, key registry and previous-slot requests.
pub struct Network<M, C = SimCrypto> {
    pub config: PoclConfig,
    pub nodes: Vec<OracleNode>,
    pub model: M,
    crypto: C,
    slot: u64,
    previous_requests: Vec<ContentId>,
    num_contents: u32,
    log: Option<Vec<LogEvent>>,
}

impl<M: CooperativeModel, C: CryptoProvider> Network<M, C> {
    pub fn new(
        config: PoclConfig,
        behaviors: &[Behavior],
        initial_params: Vec<f64>,
        model: M,
        crypto: C,
        num_contents: u32,
    ) -> Result<Self> {
        config.validate()?;
        if behaviors.is_empty() {
            return Err(domain("a network needs at least one oracle"));
        }
        let nodes = behaviors
            .iter()
            .enumerate()
            .map(|(i, &behavior)| OracleNode {
                id: i as u32,
                behavior,
                params: initial_params.clone(),
                streak: 0,
            })
            .collect();
        Ok(Self {
            config,
            nodes,
            model,
            crypto,
            slot: 0,
            previous_requests: Vec::new(),
            num_contents,
            log: None,
        })
    }

    pub fn with_logging(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn take_log(&mut self) -> Vec<LogEvent> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn crypto(&self) -> &C {
        &self.crypto
    }

    /// Requests of the slot just finished; seeds the next shared test set.
    pub fn set_previous_requests(&mut self, requests: Vec<ContentId>) {
        self.previous_requests = requests;
    }

    fn event(&mut self, phase: Phase, event: &str, sender: Option<u32>, outcome: Option<&str>) {
        if let Some(log) = self.log.as_mut() {
            log.push(LogEvent {
                slot: self.slot,
                phase,
                event: event.to_string(),
                sender,
                outcome: outcome.map(str::to_string),
            });
        }
    }

    fn fail(&mut self, mut out: RoundOutcome, phase: Phase, reason: &str) -> RoundOutcome {
        self.event(phase, "round", None, Some(reason));
        out.phase = Phase::Failed;
        out.failure = Some(reason.to_string());
        self.finish(&out);
        out
    }

    fn finish(&mut self, out: &RoundOutcome) {
        for node in &mut self.nodes {
            node.streak = next_streak(node.streak, Some(node.id) == out.trainer);
        }
        self.slot += 1;
    }

    fn is_byzantine(&self, id: u32) -> bool {
        self.nodes[id as usize].behavior == Behavior::Byzantine
    }

    fn garbage_signature(rng: &mut SimRng) -> Vec<u8> {
        (0..SIGNATURE_LEN).map(|_| rng.random()).collect()
    }

    /// Run one consensus round for the current slot.
    pub fn run_round(&mut self, plan: &RoundPlan, seed: u64) -> Result<RoundOutcome> {
        let cfg = self.config;
        let t = self.slot;
        let n = self.nodes.len();
        let mut rng = rng::stream(seed, "pocl-round", &[t]);
        let mut out = RoundOutcome::new(t);
        let crash = |rng: &mut SimRng, id: u32, phase: Phase| {
            plan.crashes_at(id, phase) || (plan.random_faults && rng.random_bool(cfg.p_fail))
        };

        // Prepare.
        let mut active: Vec<bool> = self
            .nodes
            .iter()
            .map(|o| o.behavior != Behavior::Faulty)
            .collect();
        for id in 0..n as u32 {
            if active[id as usize] && crash(&mut rng, id, Phase::Prepare) {
                active[id as usize] = false;
                out.prepare_failures += 1;
                self.event(Phase::Prepare, "crash", Some(id), None);
            }
        }
        let test_set = shared_test_set(
            &self.previous_requests,
            cfg.test_set_size,
            t,
            self.num_contents,
        );
        let mut own_hits = vec![0u32; n];
        let mut pool: Vec<Candidate> = Vec::new();
        for id in 0..n as u32 {
            let i = id as usize;
            if !active[i] {
                continue;
            }
            let byz = self.is_byzantine(id);
            own_hits[i] = self.model.test_hits(&self.nodes[i].params, &test_set);
            let mut proof =
                CooperativeProof::new(own_hits[i], self.model.reward(id, &self.nodes[i].params, t));
            let mut stamped = t;
            if byz && cfg.strategy.falsify_proof {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                proof = CooperativeProof::new(0, sign * 1000.0);
            }
            if byz && cfg.strategy.stale_slot {
                stamped = t.checked_sub(1).unwrap_or(t + 1);
            }
            let mut msg = ConsensusMessage::signed(
                &self.crypto,
                id,
                stamped,
                Payload::Prepare {
                    params_digest: params_digest(&self.nodes[i].params),
                    test_hits: proof.test_hits,
                    reward: proof.reward,
                },
            );
            if byz && cfg.strategy.forge_signature {
                msg.signature = Self::garbage_signature(&mut rng);
            }
            // Every recipient sees the same delay and bytes, so one check
            // stands for all of them.
            let delay = rng.random_range(1..=cfg.max_delay);
            let verdict = if delay > cfg.t_pre {
                "late"
            } else if msg.slot != t {
                "stale slot"
            } else if !msg.verify(&self.crypto) {
                "bad signature"
            } else {
                "pooled"
            };
            self.event(Phase::Prepare, "prepare", Some(id), Some(verdict));
            if verdict == "pooled" {
                let Payload::Prepare {
                    test_hits, reward, ..
                } = msg.payload
                else {
                    unreachable!()
                };
                pool.push(Candidate {
                    oracle: id,
                    proof: CooperativeProof::new(test_hits, reward),
                    streak: self.nodes[i].streak,
                });
            }
        }
        out.ticks += cfg.t_pre;
        out.pool = pool.iter().map(|c| c.oracle).collect();
        if pool.is_empty() {
            return Ok(self.fail(out, Phase::Prepare, "no active oracles"));
        }

        // Train, with re-election on timeout.
        out.phase = Phase::Train;
        let mut order: Vec<u32> = election_order(&pool, cfg.beta)?
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        if let Some(f) = plan.force_trainer {
            if let Some(pos) = order.iter().position(|&id| id == f) {
                let id = order.remove(pos);
                order.insert(0, id);
            }
        }
        let mut update = None;
        for &cand in &order {
            if out.train_failures > cfg.fault_budget {
                break;
            }
            if crash(&mut rng, cand, Phase::Train) {
                active[cand as usize] = false;
                out.train_failures += 1;
                out.ticks += cfg.t_tra;
                self.event(Phase::Train, "timeout", Some(cand), None);
                continue;
            }
            let params = self.nodes[cand as usize].params.clone();
            let theta = if self.is_byzantine(cand) && cfg.strategy.degrade_update {
                self.model.degrade(&params, t)
            } else {
                self.model.train(cand, &params, &out.pool, t)
            };
            out.ticks += cfg.train_ticks;
            self.event(Phase::Train, "trained", Some(cand), None);
            update = Some((cand, theta));
            break;
        }
        out.re_elections = out.train_failures.min(cfg.fault_budget);
        let Some((trainer, theta)) = update else {
            let reason = if pool.iter().all(|c| !active[c.oracle as usize]) {
                "no active oracles"
            } else {
                "trainer re-elections exhausted"
            };
            return Ok(self.fail(out, Phase::Train, reason));
        };
        out.trainer = Some(trainer);
        out.trainer_byzantine = self.is_byzantine(trainer);

        // Synchronize: sealed update to pool members, null to everyone else.
        out.phase = Phase::Sync;
        let blob = params_to_bytes(&theta);
        let in_pool = |id: u32| out.pool.binary_search(&id).is_ok();
        let mut received: Vec<Option<Vec<f64>>> = vec![None; n];
        received[trainer as usize] = Some(theta.clone());
        for id in 0..n as u32 {
            if id == trainer {
                continue;
            }
            let nonce = sync_nonce(t, trainer, id);
            let sealed = in_pool(id).then(|| self.crypto.seal(id, &nonce, &blob));
            let mut msg = ConsensusMessage::signed(
                &self.crypto,
                trainer,
                t,
                Payload::Sync {
                    recipient: id,
                    sealed,
                },
            );
            if out.trainer_byzantine && cfg.strategy.forge_signature {
                msg.signature = Self::garbage_signature(&mut rng);
            }
            if !active[id as usize] {
                continue;
            }
            if !msg.verify(&self.crypto) {
                self.event(Phase::Sync, "sync", Some(trainer), Some("bad signature"));
                continue;
            }
            match msg.payload {
                Payload::Sync {
                    sealed: Some(s), ..
                } => {
                    let opened = self
                        .crypto
                        .unseal(id, &nonce, &s)
                        .map(|b| params_from_bytes(&b));
                    match opened {
                        Some(Ok(p)) => received[id as usize] = Some(p),
                        _ => self.event(
                            Phase::Sync,
                            "sync",
                            Some(trainer),
                            Some("integrity failure"),
                        ),
                    }
                }
                _ => self.event(
                    Phase::Sync,
                    "null sync",
                    Some(trainer),
                    Some("stop waiting"),
                ),
            }
        }
        out.ticks += cfg.max_delay;

        // Commit.
        out.phase = Phase::Commit;
        for &id in &out.pool {
            if active[id as usize] && crash(&mut rng, id, Phase::Commit) {
                active[id as usize] = false;
                out.commit_failures += 1;
                self.event(Phase::Commit, "crash", Some(id), None);
            }
        }
        let voters: Vec<u32> = out
            .pool
            .iter()
            .copied()
            .filter(|&id| active[id as usize])
            .collect();
        if voters.is_empty() {
            return Ok(self.fail(out, Phase::Commit, "no active oracles"));
        }
        let mut valid: Vec<(u32, bool)> = Vec::with_capacity(voters.len());
        for &id in &voters {
            let i = id as usize;
            let byz = self.is_byzantine(id);
            let improved = received[i]
                .as_ref()
                .map(|p| self.model.test_hits(p, &test_set))
                .map(|after| {
                    if !byz && after < own_hits[i] {
                        out.honest_regressions += 1;
                    }
                    after > own_hits[i]
                })
                .unwrap_or(false);
            let vote = if byz && cfg.strategy.false_vote {
                !improved
            } else {
                improved
            };
            let mut msg = ConsensusMessage::signed(&self.crypto, id, t, Payload::Commit { vote });
            if byz && cfg.strategy.forge_signature {
                msg.signature = Self::garbage_signature(&mut rng);
            }
            let ok = msg.slot == t && in_pool(id) && msg.verify(&self.crypto);
            self.event(
                Phase::Commit,
                if vote { "commit true" } else { "commit false" },
                Some(id),
                Some(if ok { "counted" } else { "discarded" }),
            );
            if ok {
                valid.push((id, vote));
            }
        }
        out.ticks += cfg.max_delay;
        out.valid_commits = valid.len();
        out.true_votes = valid.iter().filter(|v| v.1).count();
        out.false_votes = valid.len() - out.true_votes;

        for &id in &voters {
            let Some(p) = received[id as usize].take() else {
                continue;
            };
            let own_valid = valid.iter().any(|v| v.0 == id) as usize;
            let others = out.valid_commits - own_valid;
            if others > 2 * cfg.byzantine && out.true_votes > cfg.byzantine {
                self.nodes[id as usize].params = p;
                out.adopted.push(id);
            }
        }

        out.success = if out.trainer_byzantine {
            out.false_votes > cfg.byzantine
        } else {
            out.true_votes > cfg.byzantine
        };
        out.phase = if out.success {
            Phase::Done
        } else {
            Phase::Failed
        };
        if !out.success {
            out.failure = Some("commit quorum not reached".to_string());
        }
        self.event(
            out.phase,
            "round",
            out.trainer,
            Some(if out.success { "success" } else { "failure" }),
        );
        self.finish(&out);
        Ok(out)
    }
}

fn sync_nonce(slot: u64, trainer: u32, recipient: u32) -> Vec<u8> {
    let mut n = Vec::with_capacity(16);
    n.extend_from_slice(&slot.to_le_bytes());
    n.extend_from_slice(&trainer.to_le_bytes());
    n.extend_from_slice(&recipient.to_le_bytes());
    n
}

fn trial_network(params: &ReliabilityParams, trial_seed: u64) -> Result<Network<SkillModel>> {
    let m = params.oracles;
    let mut behaviors = vec![Behavior::Honest; m];
    let byz = rand::seq::index::sample(
        &mut rng::stream(trial_seed, "byzantine-ids", &[]),
        m,
        params.byzantine.min(m),
    );
    for i in byz {
        behaviors[i] = Behavior::Byzantine;
    }
    Network::new(
        PoclConfig::from_reliability(params),
        &behaviors,
        SkillModel::initial_params(),
        SkillModel::new(trial_seed),
        SimCrypto::new(trial_seed, m),
        10,
    )
}

/// Empirical success rate of independent single rounds with `N_b` Byzantine
/// oracles at seeded positions and the standard Byzantine strategy.
pub fn monte_carlo_success(params: &ReliabilityParams, trials: usize, seed: u64) -> Result<f64> {
    params.validate()?;
    let trial = |k: usize| -> Result<bool> {
        let s = rng::derive_seed(
            seed,
            "pocl-trial",
            &[params.oracles as u64, params.p_fail.to_bits(), k as u64],
        );
        Ok(trial_network(params, s)?
            .run_round(&RoundPlan::default(), s)?
            .success)
    };
    #[cfg(feature = "parallel")]
    let wins = {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(trial)
            .collect::<Result<Vec<bool>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let wins = (0..trials).map(trial).collect::<Result<Vec<bool>>>()?;
    Ok(wins.iter().filter(|w| **w).count() as f64 / trials.max(1) as f64)
}
