//! Content universe and reproducible Zipf request workloads.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

/// Content identifier. Real contents are numbered `1..=F` by popularity rank;
/// `0` is reserved as the padding value in fixed-width encodings.
pub type ContentId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub contents: u32,
    pub alpha: f64,
    pub size_min_kb: f64,
    pub size_max_kb: f64,
    pub seed: u64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            contents: 10,
            alpha: 1.0,
            size_min_kb: 1.0,
            size_max_kb: 256.0,
            seed: 0,
        }
    }
}

/// `p[k-1] = k^-alpha / sum_j j^-alpha` for ranks `k = 1..=F`.
pub fn zipf_pmf(num_contents: u32, alpha: f64) -> Result<Vec<f64>> {
    if num_contents == 0 {
        return Err(domain("zipf_pmf requires at least one content"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(domain(format!(
            "zipf exponent must be finite and >= 0, got {alpha}"
        )));
    }
    let weights: Vec<f64> = (1..=num_contents)
        .map(|k| (k as f64).powf(-alpha))
        .collect();
    let total = neumaier_sum(&weights);
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Compensated summation; keeps normalisation error near one ulp for large F.
pub(crate) fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Ordered requests `G_{m,u}^t` from requester `u` to oracle `m` in slot `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSequence {
    pub oracle: u32,
    pub requester: u32,
    pub slot: u64,
    pub requests: Vec<ContentId>,
}

#[derive(Debug, Clone)]
pub struct ContentCatalog {
    num_contents: u32,
    alpha: f64,
    sizes_kb: Vec<f64>,
    pmf: Vec<f64>,
    sampler: WeightedIndex<f64>,
    seed: u64,
}

impl ContentCatalog {
    pub fn new(config: &CatalogConfig) -> Result<Self> {
        let pmf = zipf_pmf(config.contents, config.alpha)?;
        let sampler = WeightedIndex::new(&pmf).map_err(|e| domain(e.to_string()))?;
        let sizes_kb = log_uniform_sizes(
            config.contents,
            config.size_min_kb,
            config.size_max_kb,
            config.seed,
        )?;
        Ok(Self {
            num_contents: config.contents,
            alpha: config.alpha,
            sizes_kb,
            pmf,
            sampler,
            seed: config.seed,
        })
    }

    /// Same popularity model, sizes redrawn log-uniformly within `[min_kb, max_kb]`.
    pub fn with_size_band(&self, min_kb: f64, max_kb: f64, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        out.sizes_kb = log_uniform_sizes(self.num_contents, min_kb, max_kb, seed)?;
        Ok(out)
    }

    pub fn num_contents(&self) -> u32 {
        self.num_contents
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn contains(&self, id: ContentId) -> bool {
        (1..=self.num_contents).contains(&id)
    }

    pub fn check(&self, id: ContentId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownContent {
                id,
                num_contents: self.num_contents,
            })
        }
    }

    pub fn size_kb(&self, id: ContentId) -> Result<f64> {
        self.check(id)?;
        Ok(self.sizes_kb[id as usize - 1])
    }

    pub fn sizes_kb(&self) -> &[f64] {
        &self.sizes_kb
    }

    /// I.i.d. Zipf draws from the stream keyed on `(seed, oracle, requester, slot)`.
    pub fn generate_requests(
        &self,
        oracle: u32,
        requester: u32,
        slot: u64,
        length: usize,
        seed: u64,
    ) -> RequestSequence {
        let mut rng = rng::stream(seed, "requests", &[oracle as u64, requester as u64, slot]);
        let requests = (0..length)
            .map(|_| rng.sample(&self.sampler) as ContentId + 1)
            .collect();
        RequestSequence {
            oracle,
            requester,
            slot,
            requests,
        }
    }

    /// `G_m^t`: the concatenation of every requester's sequence to oracle `m`.
    pub fn oracle_slot_requests(
        &self,
        oracle: u32,
        slot: u64,
        requesters: u32,
        per_requester: usize,
        seed: u64,
    ) -> Vec<ContentId> {
        let mut out = Vec::with_capacity(requesters as usize * per_requester);
        for u in 0..requesters {
            out.extend(
                self.generate_requests(oracle, u, slot, per_requester, seed)
                    .requests,
            );
        }
        out
    }
}

fn log_uniform_sizes(count: u32, min_kb: f64, max_kb: f64, seed: u64) -> Result<Vec<f64>> {
    if !(min_kb > 0.0) || !(max_kb >= min_kb) || !max_kb.is_finite() {
        return Err(domain(format!(
            "content size range must satisfy 0 < min <= max, got [{min_kb}, {max_kb}]"
        )));
    }
    let (lo, hi) = (min_kb.ln(), max_kb.ln());
    Ok((1..=count)
        .map(|id| {
            if hi == lo {
                return min_kb;
            }
            let mut rng = rng::stream(seed, "catalog-size", &[id as u64]);
            let u: f64 = rng.random();
            (lo + u * (hi - lo)).exp().clamp(min_kb, max_kb)
        })
        .collect())
}

/// CSV rows `(t, m, u, k, content_id)`; `k` is 1-based within each sequence.
pub fn write_requests_csv<W: Write>(sequences: &[RequestSequence], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "m", "u", "k", "content_id"])?;
    for seq in sequences {
        for (k, id) in seq.requests.iter().enumerate() {
            w.write_record([
                seq.slot.to_string(),
                seq.oracle.to_string(),
                seq.requester.to_string(),
                (k + 1).to_string(),
                id.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
