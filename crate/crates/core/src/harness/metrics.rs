use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of `metrics.jsonl`: a scenario's state after one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub slot: u64,
    pub oracle_hit_rates: Vec<f64>,
    pub global_hit_rate: f64,
    pub total_latency_ms: Option<f64>,
    pub consensus_success: Option<bool>,
    pub trainer: Option<u32>,
    pub loss: Option<f64>,
}

impl MetricsRecord {
    pub fn new(scenario: impl Into<String>, slot: u64) -> Self {
        Self {
            scenario: scenario.into(),
            slot,
            oracle_hit_rates: Vec::new(),
            global_hit_rate: 0.0,
            total_latency_ms: None,
            consensus_success: None,
            trainer: None,
            loss: None,
        }
    }
}

/// Append-only JSON-lines sink.
pub struct MetricsSink<W: Write> {
    out: W,
}

impl<W: Write> MetricsSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn push(&mut self, record: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_json_object_per_line() {
        let mut sink = MetricsSink::new(Vec::new());
        let mut r = MetricsRecord::new("cache-bench/LRU", 0);
        r.oracle_hit_rates = vec![0.5, 0.25];
        r.global_hit_rate = 0.375;
        sink.push(&r).unwrap();
        sink.push(&MetricsRecord::new("train", 1)).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let back: MetricsRecord = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(back, r);
    }
}
