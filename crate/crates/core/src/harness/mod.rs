//! Experiment harness: configuration, scenarios and their output tables.

pub mod bench;
pub mod config;
pub mod metrics;
pub mod scenarios;

pub use bench::{DrlModel, HitTrace, LatencyRow};
pub use config::{PolicyKind, RunConfig, Scenario, Seed};
pub use metrics::{MetricsRecord, MetricsSink};
pub use scenarios::{
    checkpoint_models, cmd_analytic, cmd_cache_bench, cmd_consensus, cmd_latency, cmd_train, run,
    run_bench, AnalyticRow, BenchOutput, ConsensusRow, ModelSource, RollingRow, SlotRow,
    SummaryRow, TrainReport,
};
