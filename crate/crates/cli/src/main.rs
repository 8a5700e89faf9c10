use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopcache::harness::{run, RunConfig, Scenario, Seed};

#[derive(Parser)]
#[command(
    name = "coopcache",
    version,
    about = "Cooperative caching and consensus experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and Monte Carlo consensus success over the oracle and P_f grids.
    Consensus(Overrides),
    /// Closed-form PoCL against PBFT.
    Analytic(Overrides),
    /// Replay policies on paired request streams.
    CacheBench(Overrides),
    /// Train the learned eviction policy and write a checkpoint.
    Train(Overrides),
    /// Retrieval latency per size band, skew and policy.
    Latency(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oracle count. For `consensus` and `analytic` this replaces the grid.
    #[arg(long)]
    oracles: Option<usize>,
    /// Per-phase fault probability. For `consensus` and `analytic` this replaces the grid.
    #[arg(long)]
    pf: Option<f64>,
    /// Popularity skew. For `cache-bench` and `latency` this replaces the sweep.
    #[arg(long)]
    alpha: Option<f64>,
    /// Policies to run (comma separated): drl, lfu, lru, random, fifo.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    /// Master seed, or "paper" for 2^64 - 1.
    #[arg(long)]
    seed: Option<Seed>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint path; `{alpha}` expands to the skew.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Training steps.
    #[arg(long)]
    steps: Option<u64>,
}

impl Overrides {
    fn apply(self, scenario: Scenario) -> coopcache::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.scenario = scenario;
        let grids = matches!(scenario, Scenario::Consensus | Scenario::Analytic);
        if let Some(m) = self.oracles {
            cfg.oracles = m;
            if grids {
                cfg.oracle_grid = vec![m];
                cfg.pbft_grid = vec![m];
            }
        }
        if let Some(p) = self.pf {
            cfg.pf = p;
            if grids {
                cfg.pf_grid = vec![p];
            }
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
            cfg.alphas = vec![a];
        }
        if !self.policy.is_empty() {
            cfg.policies = self.policy;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        if let Some(c) = self.checkpoint {
            cfg.checkpoint = Some(c);
        }
        if let Some(s) = self.steps {
            cfg.train_steps = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, overrides) = match cli.command {
        Command::Consensus(o) => (Scenario::Consensus, o),
        Command::Analytic(o) => (Scenario::Analytic, o),
        Command::CacheBench(o) => (Scenario::CacheBench, o),
        Command::Train(o) => (Scenario::Train, o),
        Command::Latency(o) => (Scenario::Latency, o),
    };
    match overrides.apply(scenario).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
