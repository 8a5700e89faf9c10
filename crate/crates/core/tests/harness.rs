use std::fs;

use coopcache::cache::Baseline;
use coopcache::harness::bench::{bench_catalog, bench_streams, latency_rows};
use coopcache::harness::{
    checkpoint_models, cmd_cache_bench, cmd_latency, cmd_train, MetricsRecord, PolicyKind,
    RunConfig, Scenario,
};

const SMALL: &str = r#"
scenario = "cache-bench"
seed = "paper"
requesters = 2
requests_per_requester = 250
slots = 3
alphas = [0.5, 1.0]
policies = ["LFU", "lru", "Random", "fifo"]
rolling_window = 50
"#;

fn small(out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml_str(SMALL).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

#[test]
fn bench_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let mut none = checkpoint_models(&cfg);
    let out = cmd_cache_bench(&cfg, &mut none).unwrap();
    // 2 skews x 4 policies x 3 slots x 4 oracles.
    assert_eq!(out.slots.len(), 96);
    assert_eq!(out.summary.len(), 8);
    assert_eq!(out.rolling.len(), 8 * (500 - 50 + 1));
    let names = [
        "cache_bench.csv",
        "cache_rolling.csv",
        "cache_summary.csv",
        "metrics.jsonl",
    ];
    let first: Vec<Vec<u8>> = names
        .iter()
        .map(|n| fs::read(dir.path().join(n)).unwrap())
        .collect();
    cmd_cache_bench(&cfg, &mut none).unwrap();
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&fs::read(dir.path().join(n)).unwrap(), bytes, "{n}");
    }
    let text = String::from_utf8(first[0].clone()).unwrap();
    assert!(text.starts_with("alpha,policy,slot,oracle,requests,hits,hit_rate\n"));
}

#[test]
fn one_metrics_record_per_scenario_and_slot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_cache_bench(&cfg, &mut checkpoint_models(&cfg)).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let records: Vec<MetricsRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2 * 4 * 3);
    let mut keys: Vec<(String, u64)> = records
        .iter()
        .map(|r| (r.scenario.clone(), r.slot))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), records.len());
    for r in &records {
        assert_eq!(r.oracle_hit_rates.len(), 4);
        let mean = r.oracle_hit_rates.iter().sum::<f64>() / 4.0;
        assert!((mean - r.global_hit_rate).abs() < 1e-12);
    }
}

#[test]
fn hit_rates_rise_with_skew_for_every_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        alphas: vec![0.5, 0.75, 1.0],
        policies: vec!["lfu".into(), "lru".into(), "random".into(), "fifo".into()],
        ..small(dir.path())
    };
    let out = cmd_cache_bench(&cfg, &mut checkpoint_models(&cfg)).unwrap();
    for b in Baseline::ALL {
        let r: Vec<f64> = cfg
            .alphas
            .iter()
            .map(|&a| out.hit_rate(a, PolicyKind::Baseline(b)).unwrap())
            .collect();
        assert!(r.windows(2).all(|w| w[0] <= w[1]), "{b}: {r:?}");
    }
}

#[test]
fn drl_without_checkpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        policies: vec!["drl".into()],
        ..small(dir.path())
    };
    let e = cmd_cache_bench(&cfg, &mut checkpoint_models(&cfg))
        .err()
        .unwrap();
    assert!(matches!(e, coopcache::Error::Config(_)), "{e}");
}

#[test]
fn trained_checkpoint_feeds_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let template = dir
        .path()
        .join("model-{alpha}.ckpt")
        .to_string_lossy()
        .into_owned();
    let train = RunConfig {
        scenario: Scenario::Train,
        train_steps: 300,
        episode_len: 200,
        eval_every: 0,
        checkpoint: Some(template.clone()),
        ..small(dir.path())
    };
    let report = cmd_train(&train).unwrap();
    assert!(report.checkpoint.ends_with("model-1.ckpt"));
    assert!(dir.path().join("train_log.csv").exists());
    let bench = RunConfig {
        alphas: vec![1.0],
        policies: vec!["drl".into(), "lru".into()],
        checkpoint: Some(template),
        ..small(dir.path())
    };
    let out = cmd_cache_bench(&bench, &mut checkpoint_models(&bench)).unwrap();
    assert!(out.hit_rate(1.0, PolicyKind::Drl).is_some());
}

#[test]
fn all_miss_trace_costs_exactly_direct_access() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let catalog = bench_catalog(&cfg, 1.0).unwrap();
    let streams = bench_streams(&cfg, &catalog);
    let misses: Vec<Vec<Vec<bool>>> = streams
        .iter()
        .map(|slot| slot.iter().map(|r| vec![false; r.len()]).collect())
        .collect();
    let rows = latency_rows(
        &cfg,
        1.0,
        &catalog,
        &streams,
        &[(PolicyKind::Baseline(Baseline::Lru), misses)],
        &cfg.latency_params(),
    )
    .unwrap();
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].policy, "direct");
        assert_eq!(pair[1].ms_per_kb, pair[0].ms_per_kb);
        assert_eq!(pair[1].mean_ms_per_kb, pair[0].mean_ms_per_kb);
    }
}

#[test]
fn latency_table_has_direct_row_per_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        alphas: vec![1.0],
        ..small(dir.path())
    };
    let rows = cmd_latency(&cfg, &mut checkpoint_models(&cfg)).unwrap();
    assert_eq!(rows.len(), 3 * 5);
    assert_eq!(rows.iter().filter(|r| r.policy == "direct").count(), 3);
    let text = fs::read_to_string(dir.path().join("latency.csv")).unwrap();
    assert!(text
        .starts_with("alpha,policy,size_band,requests,hits,total_ms,ms_per_kb,mean_ms_per_kb\n"));
    for r in rows.iter().filter(|r| r.policy != "direct") {
        let direct = rows
            .iter()
            .find(|d| d.policy == "direct" && d.size_band == r.size_band)
            .unwrap();
        assert!(r.ms_per_kb < direct.ms_per_kb);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small(std::path::Path::new("out"));
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(RunConfig::from_toml_str("capacity = 0").is_err());
    assert!(RunConfig::from_toml_str("no_such_key = 1").is_err());
}
