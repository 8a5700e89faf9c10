use rand::Rng;

use crate::catalog::ContentId;
use crate::rng;

/// The learning workload a consensus round agrees on. Parameters travel as a
/// flat `f64` vector.
pub trait CooperativeModel {
    /// Hits scored by `params` on the shared test set.
    fn test_hits(&self, params: &[f64], test_set: &[ContentId]) -> u32;
    /// Local reward reported by `oracle` in its proof.
    fn reward(&self, oracle: u32, params: &[f64], slot: u64) -> f64;
    /// One honest training step run by the elected trainer.
    fn train(&mut self, trainer: u32, params: &[f64], pool: &[u32], slot: u64) -> Vec<f64>;
    /// Update a Byzantine trainer publishes instead of training.
    fn degrade(&self, params: &[f64], slot: u64) -> Vec<f64>;
}

/// Scalar stand-in used by the Monte Carlo experiments: the single parameter
/// is a skill level, test hits are its floor capped by the test-set size,
/// honest training adds `gain`, and degradation subtracts `2 * gain`.
#[derive(Debug, Clone)]
pub struct SkillModel {
    pub gain: f64,
    pub seed: u64,
}

impl SkillModel {
    pub const INITIAL_SKILL: f64 = 50.0;

    pub fn new(seed: u64) -> Self {
        Self { gain: 1.0, seed }
    }

    pub fn initial_params() -> Vec<f64> {
        vec![Self::INITIAL_SKILL]
    }
}

impl CooperativeModel for SkillModel {
    fn test_hits(&self, params: &[f64], test_set: &[ContentId]) -> u32 {
        let skill = params.first().copied().unwrap_or(0.0).max(0.0).floor();
        (skill as u64).min(test_set.len() as u64) as u32
    }

    fn reward(&self, oracle: u32, params: &[f64], slot: u64) -> f64 {
        let noise: f64 =
            rng::stream(self.seed, "skill-reward", &[oracle as u64, slot]).random_range(-0.5..0.5);
        0.01 * params.first().copied().unwrap_or(0.0) + noise
    }

    fn train(&mut self, _trainer: u32, params: &[f64], _pool: &[u32], _slot: u64) -> Vec<f64> {
        params.iter().map(|p| p + self.gain).collect()
    }

    fn degrade(&self, params: &[f64], _slot: u64) -> Vec<f64> {
        params.iter().map(|p| p - 2.0 * self.gain).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skill_model_moves_hits_both_ways() {
        let mut m = SkillModel::new(0);
        let test: Vec<ContentId> = vec![1; 200];
        let p = SkillModel::initial_params();
        let before = m.test_hits(&p, &test);
        assert_eq!(before, 50);
        let trained = m.train(0, &p, &[0], 0);
        assert!(m.test_hits(&trained, &test) > before);
        assert!(m.test_hits(&m.degrade(&p, 0), &test) < before);
        assert_eq!(m.test_hits(&[500.0], &test), 200);
        assert_eq!(m.test_hits(&[-3.0], &test), 0);
    }

    #[test]
    fn rewards_are_small_and_seeded() {
        let m = SkillModel::new(4);
        let a = m.reward(1, &[50.0], 3);
        assert_eq!(a, m.reward(1, &[50.0], 3));
        assert!((a - 0.5).abs() <= 0.5);
    }
}
