//! Brute-force check that decentralized greedy actions are jointly greedy.

use crate::cache::CachePool;
use crate::catalog::ContentId;
use crate::drl::features::{legal_action_features, state_features, AgentHistory, Observation};
use crate::drl::learner::argmax;
use crate::drl::mixer::Mixer;
use crate::drl::nn::MlpShape;

/// True iff the lexicographically first joint maximizer of the mixed value
/// equals the tuple of per-agent argmaxes (lowest index on ties).
///
/// `q_tables[m]` holds agent `m`'s values over its legal actions.
pub fn verify_igm_consistency(
    mixer: &Mixer,
    params: &[f64],
    q_tables: &[Vec<f64>],
    state: &[f64],
) -> bool {
    if q_tables.iter().any(|q| q.is_empty()) {
        return false;
    }
    let local: Vec<usize> = q_tables
        .iter()
        .map(|q| argmax(q).expect("non-empty"))
        .collect();
    let mut joint = vec![0usize; q_tables.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let qs: Vec<f64> = joint.iter().zip(q_tables).map(|(&a, q)| q[a]).collect();
        let v = mixer.forward(params, &qs, state);
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, joint.clone()));
        }
        // Odometer with agent 0 most significant, so the scan is lexicographic.
        let mut m = q_tables.len();
        loop {
            if m == 0 {
                return best.expect("at least one joint action").1 == local;
            }
            m -= 1;
            joint[m] += 1;
            if joint[m] < q_tables[m].len() {
                break;
            }
            joint[m] = 0;
        }
    }
}

/// Enumerable toy world for the consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyInstance {
    pub oracles: usize,
    pub contents: u32,
    pub capacity: usize,
    /// Every request history of exactly this length is enumerated.
    pub history_len: usize,
}

impl TinyInstance {
    pub fn new(oracles: usize, contents: u32, capacity: usize, history_len: usize) -> Self {
        assert!(
            (1..=2).contains(&oracles)
                && (1..=3).contains(&contents)
                && (1..=2).contains(&capacity),
            "instance too large to enumerate"
        );
        Self {
            oracles,
            contents,
            capacity,
            history_len,
        }
    }

    /// Every (cache arrangement, request, history) one oracle can face.
    pub fn local_situations(&self) -> Vec<(Observation, AgentHistory)> {
        let ids: Vec<ContentId> = (1..=self.contents).collect();
        let mut caches: Vec<Vec<ContentId>> = vec![vec![]];
        for size in 1..=self.capacity.min(ids.len()) {
            caches.extend(arrangements(&ids, size));
        }
        let mut histories = vec![AgentHistory::new(self.history_len.max(1), self.contents)];
        for _ in 0..self.history_len {
            histories = histories
                .into_iter()
                .flat_map(|h| {
                    ids.iter().map(move |&id| {
                        let mut h = h.clone();
                        h.push(id, false, 0);
                        h
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for cache in &caches {
            let pool = CachePool::with_contents(self.capacity, self.contents, cache)
                .expect("valid toy cache");
            for &req in &ids {
                for pending in std::iter::once(None).chain(ids.iter().copied().map(Some)) {
                    let stream: Vec<ContentId> = std::iter::once(req).chain(pending).collect();
                    let obs = Observation::new(&pool, &stream, 0, 2);
                    for h in &histories {
                        out.push((obs.clone(), h.clone()));
                    }
                }
            }
        }
        out
    }
}

fn arrangements(ids: &[ContentId], size: usize) -> Vec<Vec<ContentId>> {
    if size == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &id) in ids.iter().enumerate() {
        let rest: Vec<ContentId> = ids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &x)| x)
            .collect();
        for mut tail in arrangements(&rest, size - 1) {
            tail.insert(0, id);
            out.push(tail);
        }
    }
    out
}

/// Run [`verify_igm_consistency`] on every joint situation of `instance`,
/// with Q tables from the agent network and the state its mixer would see.
pub fn verify_igm_on_instance(
    agent: &MlpShape,
    agent_params: &[f64],
    mixer: &Mixer,
    mixer_params: &[f64],
    instance: &TinyInstance,
) -> bool {
    assert_eq!(mixer.agents, instance.oracles);
    let local: Vec<(Vec<f64>, Vec<f64>)> = instance
        .local_situations()
        .iter()
        .map(|(obs, hist)| {
            let q = legal_action_features(obs, hist)
                .iter()
                .map(|(_, f)| agent.forward(agent_params, f)[0])
                .collect();
            (q, state_features(obs, hist).to_vec())
        })
        .collect();
    let mut idx = vec![0usize; instance.oracles];
    loop {
        let tables: Vec<Vec<f64>> = idx.iter().map(|&i| local[i].0.clone()).collect();
        let state: Vec<f64> = idx
            .iter()
            .flat_map(|&i| local[i].1.iter().copied())
            .collect();
        if !verify_igm_consistency(mixer, mixer_params, &tables, &state) {
            return false;
        }
        let mut m = instance.oracles;
        loop {
            if m == 0 {
                return true;
            }
            m -= 1;
            idx[m] += 1;
            if idx[m] < local.len() {
                break;
            }
            idx[m] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drl::features::STATE_FEATURES;
    use crate::drl::mixer::MixerKind;
    use crate::rng::{self, SimRng};
    use rand::Rng;

    fn tables(r: &mut SimRng, agents: usize) -> Vec<Vec<f64>> {
        (0..agents)
            .map(|_| {
                let n = r.random_range(1..=3);
                (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
            })
            .collect()
    }

    #[test]
    fn sum_mixer_always_consistent() {
        let mut r = rng::stream(0, "igm", &[]);
        let m = Mixer::new(MixerKind::Sum, 2, 0, 0);
        for _ in 0..200 {
            assert!(verify_igm_consistency(&m, &[], &tables(&mut r, 2), &[]));
        }
    }

    #[test]
    fn random_monotone_mixers_are_consistent() {
        let mut r = rng::stream(1, "igm", &[]);
        let m = Mixer::new(MixerKind::Qmix, 2, 2 * STATE_FEATURES, 4);
        for _ in 0..100 {
            let p: Vec<f64> = (0..m.num_params())
                .map(|_| r.random_range(-1.0..1.0))
                .collect();
            let s: Vec<f64> = (0..m.state_dim).map(|_| r.random_range(0.0..1.0)).collect();
            assert!(verify_igm_consistency(&m, &p, &tables(&mut r, 2), &s));
        }
    }

    #[test]
    fn negative_weight_breaks_consistency() {
        let mut r = rng::stream(2, "igm", &[]);
        let m = Mixer::new(MixerKind::Linear, 2, 0, 0);
        let p = [1.0, -1.0, 0.0];
        let found = (0..100).any(|_| !verify_igm_consistency(&m, &p, &tables(&mut r, 2), &[]));
        assert!(found, "expected a counterexample");
    }

    #[test]
    fn tiny_instance_enumeration() {
        let inst = TinyInstance::new(2, 3, 2, 1);
        // 1 + 3 + 6 caches, 3 requests, 4 pending options, 3 histories.
        assert_eq!(inst.local_situations().len(), 10 * 3 * 4 * 3);
    }

    #[test]
    fn network_policy_is_consistent_on_tiny_instance() {
        let mut r = rng::stream(3, "igm", &[]);
        let agent = MlpShape::new(vec![crate::drl::features::ACTION_FEATURES, 4, 1]);
        let m = Mixer::new(MixerKind::Qmix, 2, 2 * STATE_FEATURES, 3);
        let ap = agent.init(&mut r);
        let mp: Vec<f64> = (0..m.num_params())
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        assert!(verify_igm_on_instance(
            &agent,
            &ap,
            &m,
            &mp,
            &TinyInstance::new(2, 3, 2, 0)
        ));
    }
}
