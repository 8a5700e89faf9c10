//! Fixed-primary PBFT under the same per-phase crash process as PoCL.
//!
//! A round passes through request, pre-prepare, prepare, commit and reply.
//! Every live replica (primary included) crashes independently with `P_f` at
//! each phase. The round succeeds iff the primary survives all phases and at
//! most `N_f` of the `M - 1` backups have crashed by the end. No view change
//! is modelled, so a primary crash is fatal.

use rand::Rng;

use super::reliability::{binomial_pmf, ReliabilityParams};
use crate::error::Result;
use crate::rng;

pub const PBFT_PHASES: i32 = 5;

pub fn pbft_success(params: &ReliabilityParams) -> Result<f64> {
    params.validate()?;
    let survive = (1.0 - params.p_fail).powi(PBFT_PHASES);
    let backups = params.oracles - 1;
    let crash = 1.0 - survive;
    let within_budget: f64 = (0..=params.fault_budget.min(backups))
        .map(|k| binomial_pmf(backups, k, crash))
        .sum();
    Ok((survive * within_budget).clamp(0.0, 1.0))
}

/// Phase-by-phase simulation of the same model.
pub fn pbft_monte_carlo(params: &ReliabilityParams, trials: usize, seed: u64) -> Result<f64> {
    params.validate()?;
    let mut successes = 0usize;
    for trial in 0..trials {
        let mut rng = rng::stream(seed, "pbft-trial", &[params.oracles as u64, trial as u64]);
        let mut alive = vec![true; params.oracles];
        for _ in 0..PBFT_PHASES {
            for a in alive.iter_mut().filter(|a| **a) {
                if rng.random_bool(params.p_fail) {
                    *a = false;
                }
            }
        }
        let crashed_backups = alive[1..].iter().filter(|a| !**a).count();
        if alive[0] && crashed_backups <= params.fault_budget {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::p_success;

    #[test]
    fn edges() {
        for m in [1, 10, 100] {
            assert_eq!(
                pbft_success(&ReliabilityParams::for_oracles(m, 0.0)).unwrap(),
                1.0
            );
            assert_eq!(
                pbft_success(&ReliabilityParams::for_oracles(m, 1.0)).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn closed_form_matches_simulation() {
        for (m, pf) in [(4, 0.1), (10, 0.1), (50, 0.05), (50, 0.1)] {
            let p = ReliabilityParams::for_oracles(m, pf);
            let exact = pbft_success(&p).unwrap();
            let mc = pbft_monte_carlo(&p, 20_000, 3).unwrap();
            // 4 sigma at 2e4 trials is at most 0.0142.
            assert!(
                (exact - mc).abs() < 0.0142,
                "M={m} P_f={pf}: {exact} vs {mc}"
            );
        }
    }

    #[test]
    fn below_pocl_from_ten_oracles() {
        for m in [10, 20, 50, 100, 200] {
            let p = ReliabilityParams::for_oracles(m, 0.1);
            assert!(pbft_success(&p).unwrap() < p_success(&p).unwrap());
        }
    }

    #[test]
    fn shrinks_with_network_size_at_ten_percent() {
        let rates: Vec<f64> = [50, 100, 200, 300]
            .iter()
            .map(|&m| pbft_success(&ReliabilityParams::for_oracles(m, 0.1)).unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
    }
}
