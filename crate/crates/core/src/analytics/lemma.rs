use crate::cache::HitLedger;

/// Central-difference `dH_tot/dH_m` for each oracle in `slot`, paired with the
/// closed form `(|G_m| + eps) / (|G| + eps)`.
pub fn lemma1_derivatives(ledger: &HitLedger, slot: u64) -> Vec<(u32, f64, f64)> {
    let eps = ledger.epsilon();
    let oracles: Vec<u32> = ledger
        .oracles()
        .into_iter()
        .filter(|&m| ledger.get(m, slot).is_some())
        .collect();
    let reqs: Vec<f64> = oracles
        .iter()
        .map(|&m| ledger.requests(m, slot) as f64)
        .collect();
    let rates: Vec<f64> = oracles.iter().map(|&m| ledger.hit_rate(m, slot)).collect();
    let total: f64 = reqs.iter().sum();
    // H_tot expressed through the per-oracle rates: h_m = H_m (|G_m| + eps).
    let h_tot = |rates: &[f64]| -> f64 {
        rates
            .iter()
            .zip(&reqs)
            .map(|(r, g)| r * (g + eps))
            .sum::<f64>()
            / (total + eps)
    };
    let delta = 1e-3;
    (0..oracles.len())
        .map(|m| {
            let mut up = rates.clone();
            let mut down = rates.clone();
            up[m] += delta;
            down[m] -= delta;
            let fd = (h_tot(&up) - h_tot(&down)) / (2.0 * delta);
            (oracles[m], fd, (reqs[m] + eps) / (total + eps))
        })
        .collect()
}

/// Every derivative is positive and within `1e-9` of the closed form.
pub fn verify_lemma1(ledger: &HitLedger, slot: u64) -> bool {
    let d = lemma1_derivatives(ledger, slot);
    !d.is_empty()
        && d.iter()
            .all(|&(_, fd, cf)| fd > 0.0 && (fd - cf).abs() <= 1e-9)
}
