//! Browser bindings: consensus reliability, a baseline cache benchmark and
//! the retrieval latency model. Every function returns JSON.

use coopcache::analytics::{
    latency_dlt, latency_don, p_success, pbft_success, LatencyParams, ReliabilityParams,
};
use coopcache::harness::{run_bench, RunConfig, Seed};
use coopcache::pocl::monte_carlo_success;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Closed-form PoCL and PBFT success, plus a Monte Carlo estimate.
#[wasm_bindgen]
pub fn consensus(oracles: usize, p_fail: f64, trials: usize, seed: u32) -> Result<String, String> {
    let p = ReliabilityParams::for_oracles(oracles, p_fail);
    let out = json!({
        "oracles": oracles,
        "byzantine": p.byzantine,
        "fault_budget": p.fault_budget,
        "p_fail": p_fail,
        "pocl": p_success(&p).map_err(js)?,
        "pbft": pbft_success(&p).map_err(js)?,
        "montecarlo": monte_carlo_success(&p, trials.max(1), seed as u64).map_err(js)?,
        "trials": trials.max(1),
    });
    Ok(out.to_string())
}

/// Replay one oracle's Zipf stream under every baseline policy.
#[wasm_bindgen]
pub fn cache_bench(
    alpha: f64,
    capacity: usize,
    requests: usize,
    min_kb: f64,
    max_kb: f64,
    seed: u32,
) -> Result<String, String> {
    let cfg = RunConfig {
        seed: Seed(seed as u64),
        alphas: vec![alpha],
        oracles: 1,
        capacity,
        requesters: 1,
        requests_per_requester: requests,
        eval_start: (requests / 10).min(200),
        policies: ["LFU", "LRU", "Random", "FIFO"].map(String::from).to_vec(),
        size_bands: vec![[min_kb, max_kb]],
        ..RunConfig::default()
    };
    cfg.validate().map_err(js)?;
    let out = run_bench(&cfg, &mut |_| {
        Err(coopcache::Error::Config(
            "no learned model in the browser demo".into(),
        ))
    })
    .map_err(js)?;
    let rows: Vec<_> = out
        .latency
        .iter()
        .map(|l| {
            let hit_rate = out
                .summary
                .iter()
                .find(|s| s.policy == l.policy)
                .map(|s| s.eval_hit_rate);
            json!({ "policy": l.policy, "hit_rate": hit_rate, "ms_per_kb": l.ms_per_kb })
        })
        .collect();
    Ok(json!(rows).to_string())
}

/// Cache-hit and storage-fetch latency of one content.
#[wasm_bindgen]
pub fn latency(size_kb: f64) -> Result<String, String> {
    let p = LatencyParams::default();
    let hit = latency_don(size_kb, &p).map_err(js)?;
    let miss = latency_dlt(size_kb, &p).map_err(js)?;
    Ok(json!({ "size_kb": size_kb, "cache_ms": hit, "storage_ms": miss }).to_string())
}
