use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Test-set hit count and local reward published in PREPARE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperativeProof {
    pub test_hits: u32,
    pub reward: f64,
}

impl CooperativeProof {
    pub fn new(test_hits: u32, reward: f64) -> Self {
        Self { test_hits, reward }
    }

    pub fn distance(&self, other: &CooperativeProof) -> f64 {
        let dpsi = self.test_hits as f64 - other.test_hits as f64;
        dpsi.hypot(self.reward - other.reward)
    }
}

/// One pool entry: oracle id, its proof, and its consecutive-trainer streak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub oracle: u32,
    pub proof: CooperativeProof,
    pub streak: u32,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "decay factor must lie in (0, 1], got {beta}"
        )))
    }
}

/// `L_m = beta^-streak / (|pool| - 1) * sum_{m' != m} l(phi_m, phi_m')`.
///
/// A pool of one scores `0` for its only member.
pub fn selection_score(index: usize, pool: &[Candidate], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let me = pool
        .get(index)
        .ok_or_else(|| domain(format!("pool index {index} out of range")))?;
    if pool.len() < 2 {
        return Ok(0.0);
    }
    let sum: f64 = pool
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != index)
        .map(|(_, other)| me.proof.distance(&other.proof))
        .sum();
    Ok(beta.powi(-(me.streak as i32)) * sum / (pool.len() - 1) as f64)
}

/// Pool members from most to least preferred: ascending score, then shorter
/// streak, then lower id. Re-election after a trainer timeout walks this list.
pub fn election_order(pool: &[Candidate], beta: f64) -> Result<Vec<(u32, f64)>> {
    let mut scored = (0..pool.len())
        .map(|i| Ok((pool[i], selection_score(i, pool, beta)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(a, la), (b, lb)| {
        la.total_cmp(lb)
            .then(a.streak.cmp(&b.streak))
            .then(a.oracle.cmp(&b.oracle))
    });
    Ok(scored.into_iter().map(|(c, l)| (c.oracle, l)).collect())
}

/// `None` for an empty pool.
pub fn elect_trainer(pool: &[Candidate], beta: f64) -> Result<Option<u32>> {
    Ok(election_order(pool, beta)?.first().map(|(id, _)| *id))
}

/// Streak after a round: previous + 1 for the round's trainer, else 0.
pub fn next_streak(previous: u32, was_trainer: bool) -> u32 {
    if was_trainer {
        previous + 1
    } else {
        0
    }
}
