use std::fs;

use coopcache::drl::checkpoint;
use coopcache::drl::{greedy_hit_rate, train, QmixLearner, TrainConfig, DEFAULT_WARMUP};
use coopcache::harness::{cmd_train, MetricsRecord, RunConfig, Scenario};
use coopcache::rng;

fn quick(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        scenario: Scenario::Train,
        out: dir.to_path_buf(),
        train_steps: 600,
        episode_len: 300,
        eval_every: 200,
        eval_requests: 400,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_checkpoint_and_log() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_train(&quick(a.path())).unwrap();
    cmd_train(&quick(b.path())).unwrap();
    for f in ["model.ckpt", "train_log.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let c = checkpoint::load(&a.path().join("model.ckpt")).unwrap();
    assert_eq!(c.env_steps, 600);
    assert_eq!(c.config, quick(a.path()).train_config(1.0));
}

#[test]
fn consensus_training_adopts_the_agreed_update() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        consensus_training: true,
        steps_per_round: 200,
        pf: 0.0,
        ..quick(dir.path())
    };
    let report = cmd_train(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let records: Vec<MetricsRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 3);
    assert!(records
        .iter()
        .all(|r| r.trainer.is_some() && r.loss.is_some()));
    let c = checkpoint::load(&report.checkpoint).unwrap();
    assert_eq!(c.learner.agent_params(), &report.model.params[..]);
}

fn smoothed(log: &[coopcache::drl::TrainLogRow], around: u64, half: u64) -> f64 {
    let v: Vec<f64> = log
        .iter()
        .filter(|r| r.step + half >= around && r.step <= around + half)
        .map(|r| r.loss)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Trains 20k steps at alpha = 1; about a minute in release.
#[test]
fn training_lowers_loss_and_beats_the_untrained_policy() {
    let cfg = TrainConfig {
        steps: 20_000,
        eval_every: 0,
        ..Default::default()
    };
    let out = train(&cfg).unwrap();
    let early = smoothed(&out.log, 100, 500);
    let late = smoothed(&out.log, 10_000, 500);
    assert!(
        late < early,
        "smoothed loss {early} at 100, {late} at 10000"
    );

    let catalog = cfg.catalog().unwrap();
    let streams = cfg.eval_streams(&catalog);
    let rate = |l: &QmixLearner| {
        greedy_hit_rate(
            l.agent_shape(),
            l.agent_params(),
            &streams,
            cfg.capacity,
            cfg.num_contents,
            cfg.window,
            cfg.horizon,
            DEFAULT_WARMUP,
        )
        .unwrap()
    };
    let untrained = QmixLearner::new(
        cfg.learner.clone(),
        cfg.oracles,
        rng::derive_seed(cfg.seed, "learner", &[]),
    )
    .unwrap();
    let (before, after) = (rate(&untrained), rate(&out.learner));
    assert!(after >= before + 0.1, "untrained {before}, trained {after}");
}
