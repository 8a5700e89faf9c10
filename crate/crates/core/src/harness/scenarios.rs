//! The five runnable scenarios. Each writes its tables under `cfg.out` and
//! returns the rows it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::{
    bench_catalog, bench_streams, evaluation_hit_rate, latency_rows, replay, rolling_hit_rate,
    DrlModel, HitTrace, LatencyRow,
};
use super::config::{PolicyKind, RunConfig, Scenario};
use super::metrics::{MetricsRecord, MetricsSink};
use crate::analytics::{p_success, pbft_success, ReliabilityParams};
use crate::drl::{checkpoint, train, write_train_log, DrlCooperative, TrainLogRow};
use crate::error::{config, Result};
use crate::pocl::{monte_carlo_success, Behavior, Network, PoclConfig, RoundPlan, SimCrypto};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRow {
    #[serde(rename = "M")]
    pub oracles: usize,
    #[serde(rename = "N_b")]
    pub byzantine: usize,
    #[serde(rename = "N_f")]
    pub fault_budget: usize,
    #[serde(rename = "P_f")]
    pub p_fail: f64,
    pub p_analytic: f64,
    pub p_montecarlo: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    #[serde(rename = "M")]
    pub oracles: usize,
    #[serde(rename = "N_b")]
    pub byzantine: usize,
    #[serde(rename = "N_f")]
    pub fault_budget: usize,
    #[serde(rename = "P_f")]
    pub p_fail: f64,
    pub p_pocl: f64,
    pub p_pbft: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub alpha: f64,
    pub policy: String,
    pub slot: u64,
    pub oracle: usize,
    pub requests: usize,
    pub hits: usize,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRow {
    pub alpha: f64,
    pub policy: String,
    pub request: usize,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: f64,
    pub policy: String,
    pub eval_hit_rate: f64,
}

pub struct BenchOutput {
    pub summary: Vec<SummaryRow>,
    pub slots: Vec<SlotRow>,
    pub rolling: Vec<RollingRow>,
    pub latency: Vec<LatencyRow>,
}

impl BenchOutput {
    pub fn hit_rate(&self, alpha: f64, policy: PolicyKind) -> Option<f64> {
        let name = policy.to_string();
        self.summary
            .iter()
            .find(|r| r.alpha == alpha && r.policy == name)
            .map(|r| r.eval_hit_rate)
    }
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.join(name))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Source of trained models for DRL-DC, keyed by skew.
pub type ModelSource<'a> = dyn FnMut(f64) -> Result<DrlModel> + 'a;

/// Loads `cfg.checkpoint` with `{alpha}` expanded.
pub fn checkpoint_models(cfg: &RunConfig) -> impl FnMut(f64) -> Result<DrlModel> + '_ {
    move |alpha| {
        let path = cfg
            .checkpoint_path(alpha)
            .ok_or_else(|| config("DRL-DC needs `checkpoint` (run `train` first)"))?;
        DrlModel::load(&path)
    }
}

/// Analytic and Monte Carlo success probability over the oracle and fault grids.
pub fn cmd_consensus(cfg: &RunConfig) -> Result<Vec<ConsensusRow>> {
    let mut rows = Vec::new();
    for &m in &cfg.oracle_grid {
        for &pf in &cfg.pf_grid {
            let p = ReliabilityParams::for_oracles(m, pf);
            rows.push(ConsensusRow {
                oracles: m,
                byzantine: p.byzantine,
                fault_budget: p.fault_budget,
                p_fail: pf,
                p_analytic: p_success(&p)?,
                p_montecarlo: monte_carlo_success(&p, cfg.trials, cfg.seed.0)?,
                trials: cfg.trials,
            });
        }
    }
    write_rows(&out_file(cfg, "consensus.csv")?, &rows)?;
    Ok(rows)
}

/// PoCL against three-phase PBFT, closed form only.
pub fn cmd_analytic(cfg: &RunConfig) -> Result<Vec<AnalyticRow>> {
    let mut rows = Vec::new();
    for &m in &cfg.pbft_grid {
        for &pf in &cfg.pf_grid {
            let p = ReliabilityParams::for_oracles(m, pf);
            rows.push(AnalyticRow {
                oracles: m,
                byzantine: p.byzantine,
                fault_budget: p.fault_budget,
                p_fail: pf,
                p_pocl: p_success(&p)?,
                p_pbft: pbft_success(&p)?,
            });
        }
    }
    write_rows(&out_file(cfg, "analytic.csv")?, &rows)?;
    Ok(rows)
}

/// Replay every configured policy on paired streams for each skew.
pub fn run_bench(cfg: &RunConfig, models: &mut ModelSource<'_>) -> Result<BenchOutput> {
    let kinds = cfg.policy_kinds()?;
    let mut out = BenchOutput {
        summary: Vec::new(),
        slots: Vec::new(),
        rolling: Vec::new(),
        latency: Vec::new(),
    };
    for &alpha in &cfg.alphas {
        let catalog = bench_catalog(cfg, alpha)?;
        let streams = bench_streams(cfg, &catalog);
        let mut runs: Vec<(PolicyKind, HitTrace)> = Vec::new();
        for &kind in &kinds {
            let model = match kind {
                PolicyKind::Drl => Some(models(alpha)?),
                PolicyKind::Baseline(_) => None,
            };
            let trace = replay(
                kind,
                &streams,
                cfg.capacity,
                cfg.contents,
                cfg.seed.0,
                model.as_ref(),
            )?;
            let policy = kind.to_string();
            for (t, slot) in trace.iter().enumerate() {
                for (m, hits) in slot.iter().enumerate() {
                    let h = hits.iter().filter(|h| **h).count();
                    out.slots.push(SlotRow {
                        alpha,
                        policy: policy.clone(),
                        slot: t as u64,
                        oracle: m,
                        requests: hits.len(),
                        hits: h,
                        hit_rate: h as f64 / hits.len().max(1) as f64,
                    });
                }
            }
            for (k, r) in rolling_hit_rate(&trace[0], cfg.rolling_window)
                .into_iter()
                .enumerate()
            {
                out.rolling.push(RollingRow {
                    alpha,
                    policy: policy.clone(),
                    request: k + cfg.rolling_window,
                    hit_rate: r,
                });
            }
            out.summary.push(SummaryRow {
                alpha,
                policy,
                eval_hit_rate: evaluation_hit_rate(&trace, cfg.eval_start),
            });
            runs.push((kind, trace));
        }
        out.latency.extend(latency_rows(
            cfg,
            alpha,
            &catalog,
            &streams,
            &runs,
            &cfg.latency_params(),
        )?);
    }
    Ok(out)
}

fn bench_metrics(cfg: &RunConfig, out: &BenchOutput) -> Vec<MetricsRecord> {
    let mut records = Vec::new();
    let mut i = 0;
    while i < out.slots.len() {
        let head = &out.slots[i];
        let group: Vec<&SlotRow> = out.slots[i..]
            .iter()
            .take_while(|r| r.alpha == head.alpha && r.policy == head.policy && r.slot == head.slot)
            .collect();
        let mut rec = MetricsRecord::new(
            format!("cache-bench/{}/alpha={}", head.policy, head.alpha),
            head.slot,
        );
        rec.oracle_hit_rates = group.iter().map(|r| r.hit_rate).collect();
        let (h, n) = group
            .iter()
            .fold((0, 0), |(h, n), r| (h + r.hits, n + r.requests));
        rec.global_hit_rate = h as f64 / n.max(1) as f64;
        if cfg.slots == 1 {
            rec.total_latency_ms = out
                .latency
                .iter()
                .find(|l| l.alpha == head.alpha && l.policy == head.policy)
                .map(|l| l.total_ms);
        }
        records.push(rec);
        i += group.len();
    }
    records
}

pub fn cmd_cache_bench(cfg: &RunConfig, models: &mut ModelSource<'_>) -> Result<BenchOutput> {
    let out = run_bench(cfg, models)?;
    write_rows(&out_file(cfg, "cache_bench.csv")?, &out.slots)?;
    write_rows(&out_file(cfg, "cache_rolling.csv")?, &out.rolling)?;
    write_rows(&out_file(cfg, "cache_summary.csv")?, &out.summary)?;
    let mut sink = MetricsSink::new(fs::File::create(out_file(cfg, "metrics.jsonl")?)?);
    for rec in bench_metrics(cfg, &out) {
        sink.push(&rec)?;
    }
    Ok(out)
}

pub fn cmd_latency(cfg: &RunConfig, models: &mut ModelSource<'_>) -> Result<Vec<LatencyRow>> {
    let out = run_bench(cfg, models)?;
    write_rows(&out_file(cfg, "latency.csv")?, &out.latency)?;
    Ok(out.latency)
}

pub struct TrainReport {
    pub checkpoint: PathBuf,
    pub log: Vec<TrainLogRow>,
    pub model: DrlModel,
}

/// Train at `cfg.alpha` and write the checkpoint and `train_log.csv`.
///
/// With `consensus_training`, every slot runs one consensus round whose
/// elected trainer advances training by `steps_per_round`; the checkpoint
/// holds the parameters adopted by oracle 0.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    let tc = cfg.train_config(cfg.alpha);
    tc.validate()?;
    let path = match cfg.checkpoint_path(cfg.alpha) {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            p
        }
        None => out_file(cfg, "model.ckpt")?,
    };
    let (learner, log, steps) = if cfg.consensus_training {
        let model = DrlCooperative::new(&tc, cfg.steps_per_round)?;
        let init = model.initial_params();
        let mut net = Network::new(
            PoclConfig::for_oracles(cfg.oracles, cfg.pf),
            &vec![Behavior::Honest; cfg.oracles],
            init,
            model,
            SimCrypto::new(cfg.seed.0, cfg.oracles),
            cfg.contents,
        )?;
        let catalog = tc.catalog()?;
        let rounds = tc.steps.div_ceil(cfg.steps_per_round);
        let mut sink = MetricsSink::new(fs::File::create(out_file(cfg, "metrics.jsonl")?)?);
        for t in 0..rounds {
            let outcome = net.run_round(&RoundPlan::default(), cfg.seed.0)?;
            let mut rec = MetricsRecord::new("train/consensus", t);
            rec.consensus_success = Some(outcome.success);
            rec.trainer = outcome.trainer;
            rec.loss = net.model.last_loss();
            let rate = net.model.trainer().evaluate()?;
            rec.oracle_hit_rates = vec![rate; cfg.oracles];
            rec.global_hit_rate = rate;
            sink.push(&rec)?;
            let previous = (0..cfg.oracles as u32)
                .flat_map(|m| {
                    catalog
                        .generate_requests(m, 0, t, cfg.window, cfg.seed.0)
                        .requests
                })
                .collect();
            net.set_previous_requests(previous);
        }
        let mut learner = net.model.trainer().learner().clone();
        learner.set_theta(&net.nodes[0].params)?;
        let trainer = net.model.trainer();
        (learner, trainer.log().to_vec(), trainer.step())
    } else {
        let o = train(&tc)?;
        (o.learner, o.log, o.env_steps)
    };
    checkpoint::save(&path, &learner, &tc, steps)?;
    write_train_log(&log, fs::File::create(out_file(cfg, "train_log.csv")?)?)?;
    Ok(TrainReport {
        checkpoint: path,
        model: DrlModel::from_learner(&learner, &tc),
        log,
    })
}

/// Run `cfg.scenario`, loading DRL-DC models from `cfg.checkpoint`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Consensus => cmd_consensus(cfg).map(drop),
        Scenario::Analytic => cmd_analytic(cfg).map(drop),
        Scenario::CacheBench => cmd_cache_bench(cfg, &mut checkpoint_models(cfg)).map(drop),
        Scenario::Latency => cmd_latency(cfg, &mut checkpoint_models(cfg)).map(drop),
        Scenario::Train => cmd_train(cfg).map(drop),
    }
}
