//! Paired replay of request streams against caching policies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::{latency_summary, LatencyParams};
use crate::cache::{BaselinePolicy, CachePolicy, CachePool};
use crate::catalog::{CatalogConfig, ContentCatalog, ContentId};
use crate::drl::checkpoint::{self, Checkpoint};
use crate::drl::nn::MlpShape;
use crate::drl::{DrlPolicy, QmixLearner, TrainConfig};
use crate::error::Result;
use crate::harness::config::{PolicyKind, RunConfig};
use crate::rng;

/// Hit indicators indexed `[slot][oracle][request]`.
pub type HitTrace = Vec<Vec<Vec<bool>>>;

/// Everything needed to deploy a trained agent network.
#[derive(Debug, Clone, PartialEq)]
pub struct DrlModel {
    pub shape: MlpShape,
    pub params: Vec<f64>,
    pub num_contents: u32,
    pub window: usize,
    pub horizon: usize,
}

impl DrlModel {
    pub fn from_learner(learner: &QmixLearner, cfg: &TrainConfig) -> Self {
        Self {
            shape: learner.agent_shape().clone(),
            params: learner.agent_params().to_vec(),
            num_contents: cfg.num_contents,
            window: cfg.window,
            horizon: cfg.horizon,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Self {
        Self::from_learner(&c.learner, &c.config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_checkpoint(&checkpoint::load(path)?))
    }

    pub fn policy(&self) -> DrlPolicy {
        DrlPolicy::new(
            self.shape.clone(),
            self.params.clone(),
            self.num_contents,
            self.window,
            self.horizon,
        )
    }
}

pub fn bench_catalog(cfg: &RunConfig, alpha: f64) -> Result<ContentCatalog> {
    ContentCatalog::new(&CatalogConfig {
        contents: cfg.contents,
        alpha,
        seed: cfg.seed.0,
        ..Default::default()
    })
}

/// `G_m^t` for every slot and oracle. Identical for every policy.
pub fn bench_streams(cfg: &RunConfig, catalog: &ContentCatalog) -> Vec<Vec<Vec<ContentId>>> {
    (0..cfg.slots)
        .map(|t| {
            (0..cfg.oracles as u32)
                .map(|m| {
                    catalog.oracle_slot_requests(
                        m,
                        t,
                        cfg.requesters,
                        cfg.requests_per_requester,
                        cfg.seed.0,
                    )
                })
                .collect()
        })
        .collect()
}

/// Replay `streams` under one policy. Each oracle keeps its cache and
/// policy state across slots.
pub fn replay(
    kind: PolicyKind,
    streams: &[Vec<Vec<ContentId>>],
    capacity: usize,
    num_contents: u32,
    seed: u64,
    model: Option<&DrlModel>,
) -> Result<HitTrace> {
    let oracles = streams.first().map_or(0, |s| s.len());
    let mut pools = (0..oracles)
        .map(|_| CachePool::new(capacity, num_contents))
        .collect::<Result<Vec<_>>>()?;
    let mut policies: Vec<Box<dyn CachePolicy>> = (0..oracles)
        .map(|m| -> Result<Box<dyn CachePolicy>> {
            Ok(match kind {
                PolicyKind::Drl => Box::new(
                    model
                        .ok_or_else(|| {
                            crate::error::config("DRL-DC requested without a trained model")
                        })?
                        .policy(),
                ),
                PolicyKind::Baseline(b) => Box::new(BaselinePolicy::new(
                    b,
                    rng::derive_seed(seed, "baseline", &[m as u64]),
                )),
            })
        })
        .collect::<Result<_>>()?;
    let mut trace = Vec::with_capacity(streams.len());
    for slot in streams {
        let mut per_oracle = Vec::with_capacity(oracles);
        for (m, requests) in slot.iter().enumerate() {
            let mut hits = Vec::with_capacity(requests.len());
            for (k, &id) in requests.iter().enumerate() {
                let hit = pools[m].probe(id)?;
                let d = policies[m].decide(&pools[m], requests, k, hit);
                if !hit {
                    pools[m].apply_decision(id, d)?;
                }
                hits.push(hit);
            }
            per_oracle.push(hits);
        }
        trace.push(per_oracle);
    }
    Ok(trace)
}

/// Requests counted in evaluation: everything except the first
/// `eval_start` requests of slot 0.
fn evaluated<T: Copy>(items: &[Vec<Vec<T>>], eval_start: usize) -> impl Iterator<Item = T> + '_ {
    items.iter().enumerate().flat_map(move |(t, slot)| {
        slot.iter()
            .flat_map(move |o| o.iter().skip(if t == 0 { eval_start } else { 0 }).copied())
    })
}

pub fn evaluation_hit_rate(trace: &HitTrace, eval_start: usize) -> f64 {
    let (mut hits, mut n) = (0u64, 0u64);
    for h in evaluated(trace, eval_start) {
        hits += h as u64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Hit rate over the trailing `window` requests of one slot, pooled over
/// oracles. Entry `k` covers requests `k + 1 - window ..= k`; the first
/// `window - 1` requests have no entry.
pub fn rolling_hit_rate(slot: &[Vec<bool>], window: usize) -> Vec<f64> {
    let len = slot.iter().map(|o| o.len()).min().unwrap_or(0);
    if window == 0 || len < window {
        return Vec::new();
    }
    let per_step: Vec<u32> = (0..len)
        .map(|k| slot.iter().filter(|o| o[k]).count() as u32)
        .collect();
    let denom = (window * slot.len()) as f64;
    let mut sum: u32 = per_step[..window].iter().sum();
    let mut out = vec![sum as f64 / denom];
    for k in window..len {
        sum = sum + per_step[k] - per_step[k - window];
        out.push(sum as f64 / denom);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub alpha: f64,
    pub policy: String,
    pub size_band: String,
    pub requests: usize,
    pub hits: usize,
    pub total_ms: f64,
    pub ms_per_kb: f64,
    pub mean_ms_per_kb: f64,
}

pub fn band_label(band: [f64; 2]) -> String {
    format!("{}-{}KB", band[0], band[1])
}

/// Catalog whose sizes are drawn in `band`.
pub fn banded_catalog(
    cfg: &RunConfig,
    catalog: &ContentCatalog,
    band: [f64; 2],
) -> Result<ContentCatalog> {
    catalog.with_size_band(
        band[0],
        band[1],
        rng::derive_seed(cfg.seed.0, "sizes", &[band[0].to_bits(), band[1].to_bits()]),
    )
}

/// Latency rows for one skew over the evaluated requests, including a
/// `direct` row in which every request goes to storage.
pub fn latency_rows(
    cfg: &RunConfig,
    alpha: f64,
    catalog: &ContentCatalog,
    streams: &[Vec<Vec<ContentId>>],
    runs: &[(PolicyKind, HitTrace)],
    params: &LatencyParams,
) -> Result<Vec<LatencyRow>> {
    let ids: Vec<ContentId> = evaluated(streams, cfg.eval_start).collect();
    let mut rows = Vec::new();
    for &band in &cfg.size_bands {
        let banded = banded_catalog(cfg, catalog, band)?;
        let sizes = ids
            .iter()
            .map(|&id| banded.size_kb(id))
            .collect::<Result<Vec<f64>>>()?;
        let direct = vec![false; ids.len()];
        let mut push = |policy: String, hits: &[bool]| -> Result<()> {
            let s = latency_summary(hits, &sizes, params)?;
            rows.push(LatencyRow {
                alpha,
                policy,
                size_band: band_label(band),
                requests: s.requests,
                hits: s.hits,
                total_ms: s.total_ms,
                ms_per_kb: s.ms_per_kb,
                mean_ms_per_kb: s.mean_ms_per_kb,
            });
            Ok(())
        };
        push("direct".into(), &direct)?;
        for (kind, trace) in runs {
            let hits: Vec<bool> = evaluated(trace, cfg.eval_start).collect();
            push(kind.to_string(), &hits)?;
        }
    }
    Ok(rows)
}
