use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Network shape and per-phase failure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams {
    pub oracles: usize,
    pub byzantine: usize,
    pub fault_budget: usize,
    pub p_fail: f64,
}

impl ReliabilityParams {
    /// `N_b = floor((M-1)/3)`, `N_f = M - 2 N_b - 1`.
    pub fn for_oracles(oracles: usize, p_fail: f64) -> Self {
        let byzantine = oracles.saturating_sub(1) / 3;
        Self {
            oracles,
            byzantine,
            fault_budget: oracles.saturating_sub(2 * byzantine + 1),
            p_fail,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.oracles == 0 {
            return Err(domain("at least one oracle is required"));
        }
        if self.byzantine + self.fault_budget >= self.oracles {
            return Err(domain(format!(
                "N_b + N_f must be below M (N_b={}, N_f={}, M={})",
                self.byzantine, self.fault_budget, self.oracles
            )));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(domain(format!(
                "P_f must lie in [0, 1], got {}",
                self.p_fail
            )));
        }
        Ok(())
    }

    /// Oracles that are not Byzantine, `M - N_b`.
    pub fn non_byzantine(&self) -> usize {
        self.oracles - self.byzantine
    }
}

/// `C(n, k) p^k (1-p)^(n-k)`, exact at `p = 0` and `p = 1`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return (k == 0) as u8 as f64;
    }
    if p == 1.0 {
        return (k == n) as u8 as f64;
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

fn binomial_cdf(n: usize, upto: usize, p: f64) -> f64 {
    (0..=upto.min(n))
        .map(|k| binomial_pmf(n, k, p))
        .sum::<f64>()
        .min(1.0)
}

/// Upper tail `P[X > above]`, summed smallest terms first.
fn binomial_sf(n: usize, above: usize, p: f64) -> f64 {
    (above + 1..=n).rev().map(|k| binomial_pmf(n, k, p)).sum()
}

/// Probability that at most `N_f` of the `M - N_b` non-Byzantine oracles fail in Prepare.
pub fn p_prepare(params: &ReliabilityParams) -> Result<f64> {
    params.validate()?;
    Ok(binomial_cdf(
        params.non_byzantine(),
        params.fault_budget,
        params.p_fail,
    ))
}

/// `sum_{j=0}^{N_f-i} P_f^j (1-P_f)`: some trainer succeeds within the remaining budget.
pub fn p_train_sync(params: &ReliabilityParams, prepare_failures: usize) -> Result<f64> {
    params.validate()?;
    if prepare_failures > params.fault_budget {
        return Err(domain(format!(
            "prepare failures {prepare_failures} exceed N_f = {}",
            params.fault_budget
        )));
    }
    let p = params.p_fail;
    Ok((0..=params.fault_budget - prepare_failures)
        .map(|j| p.powi(j as i32) * (1.0 - p))
        .sum())
}

/// Commit survives when at most `N_f - i - j` of the remaining oracles fail.
pub fn p_commit(
    params: &ReliabilityParams,
    prepare_failures: usize,
    train_failures: usize,
) -> Result<f64> {
    params.validate()?;
    let spent = prepare_failures + train_failures;
    if spent > params.fault_budget {
        return Err(domain(format!(
            "i + j = {spent} exceeds N_f = {}",
            params.fault_budget
        )));
    }
    Ok(binomial_cdf(
        params.non_byzantine() - spent,
        params.fault_budget - spent,
        params.p_fail,
    ))
}

/// Nested sum over prepare failures `i` and trainer failures `j`, each phase
/// conditioned on the failures already spent.
pub fn p_success(params: &ReliabilityParams) -> Result<f64> {
    Ok((1.0 - p_failure(params)?).clamp(0.0, 1.0))
}

/// `1 - P_suc`, summed from its small tail terms so that it keeps full
/// relative precision when success is within a few ulps of 1.
pub fn p_failure(params: &ReliabilityParams) -> Result<f64> {
    params.validate()?;
    let (n, nf, p) = (params.non_byzantine(), params.fault_budget, params.p_fail);
    let mut fail = binomial_sf(n, nf, p);
    for i in 0..=nf {
        let pre = binomial_pmf(n, i, p);
        if pre == 0.0 {
            continue;
        }
        let left = nf - i;
        // Every trainer within the remaining budget fails...
        let mut tail = p.powi(left as i32 + 1);
        // ...or trainer j + 1 succeeds and too many oracles fail in Commit.
        for j in 0..=left {
            let tra = p.powi(j as i32) * (1.0 - p);
            if tra != 0.0 {
                tail += tra * binomial_sf(n - i - j, left - j, p);
            }
        }
        fail += pre * tail;
    }
    Ok(fail.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(m: usize, nb: usize, nf: usize, pf: f64) -> ReliabilityParams {
        ReliabilityParams {
            oracles: m,
            byzantine: nb,
            fault_budget: nf,
            p_fail: pf,
        }
    }

    /// Independent route: direct enumeration of failure counts `(i, j, k)`
    /// with factorials computed by repeated multiplication.
    fn enumerate_success(p: &ReliabilityParams) -> f64 {
        fn choose(n: usize, k: usize) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        let n = p.non_byzantine();
        let q = p.p_fail;
        let mut total = 0.0;
        for i in 0..=n {
            for j in 0..=n - i {
                for k in 0..=n - i - j {
                    if i + j + k > p.fault_budget {
                        continue;
                    }
                    let a = choose(n, i) * q.powi(i as i32) * (1.0 - q).powi((n - i) as i32);
                    let b = q.powi(j as i32) * (1.0 - q);
                    let r = n - i - j;
                    let c = choose(r, k) * q.powi(k as i32) * (1.0 - q).powi((r - k) as i32);
                    total += a * b * c;
                }
            }
        }
        total
    }

    #[test]
    fn default_shape() {
        let p = ReliabilityParams::for_oracles(4, 0.1);
        assert_eq!((p.byzantine, p.fault_budget), (1, 1));
        let p = ReliabilityParams::for_oracles(100, 0.1);
        assert_eq!((p.byzantine, p.fault_budget), (33, 33));
        let p = ReliabilityParams::for_oracles(1, 0.1);
        assert_eq!((p.byzantine, p.fault_budget), (0, 0));
        p.validate().unwrap();
    }

    #[test]
    fn prepare_examples() {
        assert_eq!(p_prepare(&params(4, 1, 1, 0.0)).unwrap(), 1.0);
        assert!((p_prepare(&params(4, 1, 1, 0.1)).unwrap() - 0.972).abs() < 1e-12);
        // N_f = M - N_b is outside the validated domain, so use the raw cdf.
        assert!((binomial_cdf(3, 3, 0.37) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn train_examples() {
        assert_eq!(p_train_sync(&params(4, 1, 1, 0.0), 0).unwrap(), 1.0);
        assert!((p_train_sync(&params(4, 1, 1, 0.1), 0).unwrap() - 0.99).abs() < 1e-12);
        assert_eq!(p_train_sync(&params(4, 1, 1, 0.5), 1).unwrap(), 0.5);
        assert!(p_train_sync(&params(4, 1, 1, 0.5), 2).is_err());
    }

    #[test]
    fn commit_examples() {
        assert_eq!(p_commit(&params(4, 1, 1, 0.0), 0, 0).unwrap(), 1.0);
        assert!((p_commit(&params(4, 1, 1, 0.1), 0, 0).unwrap() - 0.972).abs() < 1e-12);
        let p = params(10, 3, 3, 0.2);
        let tail = p_commit(&p, 1, 2).unwrap();
        assert!((tail - 0.8f64.powi(10 - 3 - 3)).abs() < 1e-12);
        assert!(p_commit(&p, 2, 2).is_err());
    }

    #[test]
    fn success_edges() {
        for m in [1, 4, 10, 50, 100] {
            assert_eq!(
                p_success(&ReliabilityParams::for_oracles(m, 0.0)).unwrap(),
                1.0
            );
            assert_eq!(
                p_success(&ReliabilityParams::for_oracles(m, 1.0)).unwrap(),
                0.0
            );
        }
        assert!(p_success(&params(4, 2, 2, 0.1)).is_err());
        assert!(p_success(&params(4, 1, 1, 1.5)).is_err());
    }

    #[test]
    fn success_matches_enumeration() {
        for m in [2, 4, 7, 10, 25, 50] {
            for pf in [0.05, 0.1, 0.2, 0.3, 0.6] {
                let p = ReliabilityParams::for_oracles(m, pf);
                let a = p_success(&p).unwrap();
                let b = enumerate_success(&p);
                assert!((a - b).abs() < 1e-12, "M={m} P_f={pf}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn small_network_value_is_frozen() {
        // M=4: n=3, N_f=1. i=0: s^3 [s (s^3 + 3q s^2) + q s s^2]; i=1: 3q s^2 s s^2.
        let q: f64 = 0.1;
        let s = 1.0 - q;
        let expect = s.powi(3) * (s * s.powi(3) + s * 3.0 * q * s * s + q * s * s * s)
            + 3.0 * q * s * s * s * s * s;
        let got = p_success(&params(4, 1, 1, 0.1)).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.868_020_3).abs() < 1e-6);
    }

    #[test]
    fn failure_tail_matches_high_precision_reference() {
        // Same nested sum evaluated with 60-digit arithmetic.
        for (m, pf, expect) in [
            (50, 0.05, 4.300857415e-10),
            (100, 0.05, 3.209316423e-17),
            (300, 0.05, 8.234865478e-49),
            (50, 0.1, 1.331701662e-5),
            (100, 0.1, 6.956177493e-9),
            (200, 0.1, 2.087701244e-16),
            (300, 0.1, 7.186770598e-24),
        ] {
            let got = p_failure(&ReliabilityParams::for_oracles(m, pf)).unwrap();
            assert!((got / expect - 1.0).abs() < 1e-8, "M={m} P_f={pf}: {got:e}");
        }
    }

    #[test]
    fn success_is_monotone_in_network_size_past_double_precision() {
        let s: Vec<f64> = [50, 100, 200, 300]
            .iter()
            .map(|&m| p_success(&ReliabilityParams::for_oracles(m, 0.1)).unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[0] <= w[1]), "{s:?}");
    }

    proptest! {
        #[test]
        fn outputs_are_probabilities(m in 1usize..120, pf in 0.0f64..=1.0) {
            let p = ReliabilityParams::for_oracles(m, pf);
            for v in [p_prepare(&p).unwrap(), p_success(&p).unwrap(), p_commit(&p, 0, 0).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn success_non_increasing_in_pf(m in 1usize..80, a in 0.0f64..1.0, d in 0.0f64..0.3) {
            let lo = p_success(&ReliabilityParams::for_oracles(m, a)).unwrap();
            let hi = p_success(&ReliabilityParams::for_oracles(m, (a + d).min(1.0))).unwrap();
            prop_assert!(hi <= lo + 1e-12);
        }
    }
}
