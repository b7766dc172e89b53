//! Command-line front end: run config, flag handling and subcommands.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "chunkscope",
    version,
    about = "Chunk-boundary artifact experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// TOML run config; flags override it.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: $CHUNKSCOPE_OUT or ./chunkscope-out].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// structured (JSON) or tabular (CSV).
    #[arg(long)]
    pub format: Option<String>,
    /// Environment preset: headroom or ceiling.
    #[arg(long)]
    pub preset: Option<String>,
    /// Deviation scale of the chunk generator.
    #[arg(long)]
    pub eps_dev: Option<f64>,
    /// Generic override, e.g. `--set scan.n_samples=48`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unsteered rollouts: one trace file per episode plus a manifest.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Outcome association on stored traces.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trace files or directories [default: <out>/traces].
        inputs: Vec<PathBuf>,
        #[arg(long)]
        permutations: Option<u64>,
        /// N of the first-N contact-free window.
        #[arg(long)]
        first_n: Option<usize>,
        /// greater or two_sided.
        #[arg(long)]
        sidedness: Option<String>,
    },
    /// Within-context spread of artifact metrics over fresh noise.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        contexts: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// vary_z0, vary_z1 or vary_both.
        #[arg(long)]
        condition: Option<String>,
    },
    /// Spread under vary_z0, vary_z1 and vary_both.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        contexts: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Alpha sweeps along a chosen noise direction.
    Direction {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        contexts: Option<usize>,
        /// search, gradient or orthogonal.
        #[arg(long)]
        kind: Option<String>,
        /// Random candidates per search.
        #[arg(long)]
        directions: Option<usize>,
        /// Probe offset used to score candidates.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Trajectory-level steering arms.
    Steer {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of good,bad,baseline.
        #[arg(long)]
        arms: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Steering magnitude |alpha|.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        warmup: Option<usize>,
        /// Re-search the direction at every steered boundary.
        #[arg(long)]
        research: bool,
    },
    /// Pool structured steering reports from several runs.
    Aggregate {
        #[command(flatten)]
        common: Common,
        inputs: Vec<PathBuf>,
    },
}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

struct Overrides(Vec<String>);

impl Overrides {
    fn put(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.0.push(format!("{key}={}", v.to_string()));
        }
    }

    fn put_str(&mut self, key: &str, value: Option<&String>) {
        self.put(key, value.map(|v| quoted(v)));
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides(Vec::new());
        o.put("seed", self.seed);
        o.put("workers", self.workers);
        o.put(
            "output_dir",
            self.out.as_ref().map(|p| quoted(&p.to_string_lossy())),
        );
        o.put_str("format", self.format.as_ref());
        o.put_str("env.preset", self.preset.as_ref());
        o.put(
            "policy.deviation_scale",
            self.eps_dev.map(|x| format!("{x:?}")),
        );
        o
    }
}

fn float(x: Option<f64>) -> Option<String> {
    x.map(|v| format!("{v:?}"))
}

/// Resolve the effective config: file, then `--set`, then dedicated flags.
pub fn resolve(command: &Command) -> Result<(RunConfig, Vec<PathBuf>), CliError> {
    let (common, mut o, inputs) = match command {
        Command::Rollout { common, episodes } => {
            let mut o = common.overrides();
            o.put("rollout.n_episodes", *episodes);
            (common, o, vec![])
        }
        Command::Analyze {
            common,
            inputs,
            permutations,
            first_n,
            sidedness,
        } => {
            let mut o = common.overrides();
            o.put("analyze.n_permutations", *permutations);
            o.put("analyze.first_n", *first_n);
            o.put_str("analyze.sidedness", sidedness.as_ref());
            (common, o, inputs.clone())
        }
        Command::Scan {
            common,
            contexts,
            samples,
            condition,
        } => {
            let mut o = common.overrides();
            o.put("scan.n_contexts", *contexts);
            o.put("scan.n_samples", *samples);
            o.put_str("scan.condition", condition.as_ref());
            (common, o, vec![])
        }
        Command::Decompose {
            common,
            contexts,
            samples,
        } => {
            let mut o = common.overrides();
            o.put("decompose.n_contexts", *contexts);
            o.put("decompose.n_samples", *samples);
            (common, o, vec![])
        }
        Command::Direction {
            common,
            contexts,
            kind,
            directions,
            epsilon,
        } => {
            let mut o = common.overrides();
            o.put("direction.n_contexts", *contexts);
            o.put_str("direction.kind", kind.as_ref());
            o.put("direction.search.n_directions", *directions);
            o.put("direction.search.epsilon", float(*epsilon));
            (common, o, vec![])
        }
        Command::Steer {
            common,
            arms,
            episodes,
            alpha,
            warmup,
            research,
        } => {
            let mut o = common.overrides();
            o.put(
                "steer.arms",
                arms.as_ref().map(|a| {
                    let items: Vec<String> = a.split(',').map(|s| quoted(s.trim())).collect();
                    format!("[{}]", items.join(","))
                }),
            );
            o.put("steer.n_episodes_per_arm", *episodes);
            o.put("steer.alpha", float(*alpha));
            o.put("steer.warmup_boundaries", *warmup);
            if *research {
                o.put("steer.research_each_boundary", Some(true));
            }
            (common, o, vec![])
        }
        Command::Aggregate { common, inputs } => (common, common.overrides(), inputs.clone()),
    };
    let mut all = common.set.clone();
    all.append(&mut o.0);
    let cfg = RunConfig::load(common.config.as_deref(), &all)?;
    Ok((cfg, inputs))
}

/// Run a parsed command; returns the files written.
pub fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    let (cfg, inputs) = resolve(command)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| match command {
        Command::Rollout { .. } => commands::rollout(&cfg),
        Command::Analyze { .. } => commands::analyze(&cfg, &inputs),
        Command::Scan { .. } => commands::scan(&cfg),
        Command::Decompose { .. } => commands::decompose(&cfg),
        Command::Direction { .. } => commands::direction(&cfg),
        Command::Steer { .. } => commands::steer(&cfg),
        Command::Aggregate { .. } => commands::aggregate(&cfg, &inputs),
    })
}
