use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Retrieval latency parameters. Sizes in KB, times in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyParams {
    /// Average transmission rate in KB/ms; 1 MB/s is 1.024.
    pub rate_kb_per_ms: f64,
    pub addressing_ms: f64,
    pub chunk_addressing_ms: f64,
    pub chunk_kb: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            rate_kb_per_ms: 1.024,
            addressing_ms: 200.0,
            chunk_addressing_ms: 100.0,
            chunk_kb: 256.0,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rate_kb_per_ms", self.rate_kb_per_ms),
            ("addressing_ms", self.addressing_ms),
            ("chunk_addressing_ms", self.chunk_addressing_ms),
            ("chunk_kb", self.chunk_kb),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_size(size_kb: f64) -> Result<()> {
    if size_kb > 0.0 && size_kb.is_finite() {
        Ok(())
    } else {
        Err(domain(format!(
            "content size must be positive, got {size_kb}"
        )))
    }
}

/// Served from an oracle cache: address, then stream the whole content.
pub fn latency_don(size_kb: f64, params: &LatencyParams) -> Result<f64> {
    check_size(size_kb)?;
    Ok(params.addressing_ms + size_kb / params.rate_kb_per_ms)
}

/// Fetched from chunked storage: address, then address and stream each chunk.
pub fn latency_dlt(size_kb: f64, params: &LatencyParams) -> Result<f64> {
    check_size(size_kb)?;
    let chunks = (size_kb / params.chunk_kb).ceil();
    Ok(params.addressing_ms
        + chunks * (params.chunk_addressing_ms + params.chunk_kb / params.rate_kb_per_ms))
}

/// Sum of per-request latencies: hits at cache cost, misses at storage cost.
pub fn total_latency(hits: &[bool], sizes_kb: &[f64], params: &LatencyParams) -> Result<f64> {
    Ok(latency_summary(hits, sizes_kb, params)?.total_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub requests: usize,
    pub hits: usize,
    pub total_ms: f64,
    pub total_kb: f64,
    /// Total latency over total transferred size.
    pub ms_per_kb: f64,
    /// Mean of per-request latency/size.
    pub mean_ms_per_kb: f64,
}

pub fn latency_summary(
    hits: &[bool],
    sizes_kb: &[f64],
    params: &LatencyParams,
) -> Result<LatencySummary> {
    params.validate()?;
    if hits.len() != sizes_kb.len() {
        return Err(domain(format!(
            "{} hit indicators but {} sizes",
            hits.len(),
            sizes_kb.len()
        )));
    }
    let mut total_ms = 0.0;
    let mut total_kb = 0.0;
    let mut ratio_sum = 0.0;
    for (&hit, &size) in hits.iter().zip(sizes_kb) {
        let d = if hit {
            latency_don(size, params)?
        } else {
            latency_dlt(size, params)?
        };
        total_ms += d;
        total_kb += size;
        ratio_sum += d / size;
    }
    let n = hits.len();
    Ok(LatencySummary {
        requests: n,
        hits: hits.iter().filter(|h| **h).count(),
        total_ms,
        total_kb,
        ms_per_kb: if n == 0 { 0.0 } else { total_ms / total_kb },
        mean_ms_per_kb: if n == 0 { 0.0 } else { ratio_sum / n as f64 },
    })
}
