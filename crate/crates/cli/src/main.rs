use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pgrainbow::approximator::checkpoint::Checkpoint;
use pgrainbow::env::external::serve;
use pgrainbow::env::load_env;
use pgrainbow::eval::{emit_plots, evaluate, histogram_experiment, EvalMode, HistogramConfig, ValueSource};
use pgrainbow::{train, Agent, AgentKind, FusionMethod, TrainConfig};

#[derive(Parser)]
#[command(name = "pgrainbow", version, about = "PPO, IQN and PG-Rainbow on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes config, metrics and checkpoints to the output dir.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Value vs. fixed-first-action return histogram experiment.
    Hist(HistArgs),
    /// Render return curves and histograms from metrics files and reports.
    Plot(PlotArgs),
    /// Serve an environment over stdin/stdout (JSON lines).
    ServeEnv(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat `key = value` config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Built-in environment name or path to a TOML spec.
    #[arg(long)]
    env: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(FusionMethod))]
    fusion: Option<FusionMethod>,
    #[arg(long)]
    iqn_start: Option<u64>,
    #[arg(long)]
    num_quantiles: Option<usize>,
    #[arg(long)]
    update_epochs: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(AgentKind))]
    agent: Option<AgentKind>,
    #[arg(long)]
    total_timesteps: Option<u64>,
    /// Output directory (overrides `output_dir`); defaults to `runs/<env>-<agent>-<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Take arg-max actions instead of sampling.
    #[arg(long)]
    greedy: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Discount applied to reported returns.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Print the full summary, per-episode returns included, as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct HistArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 100_000)]
    free: usize,
    #[arg(long, default_value_t = 25_000)]
    fixed: usize,
    #[arg(long)]
    action: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the first histogram with realized returns instead of critic values.
    #[arg(long)]
    realized: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Glob of metrics files (`*.jsonl`) and histogram reports (`*.json`).
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    env: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_agent(path: &Path) -> Result<Agent> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(Agent {
        kind: ckpt.kind,
        arch: ckpt.arch,
        params: ckpt.params,
    })
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.env {
        cfg.env = v;
    }
    if let Some(v) = args.fusion {
        cfg.fusion_method = v;
    }
    if let Some(v) = args.iqn_start {
        cfg.iqn_start = v;
    }
    if let Some(v) = args.num_quantiles {
        cfg.num_quantiles = v;
    }
    if let Some(v) = args.update_epochs {
        cfg.update_epochs = v;
    }
    if let Some(v) = args.agent {
        cfg.agent = v;
    }
    if let Some(v) = args.total_timesteps {
        cfg.total_timesteps = v;
    }
    if let Some(v) = args.out {
        cfg.output_dir = Some(v);
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from(format!("runs/{}-{}-{}", cfg.env, cfg.agent, cfg.seed)));
    }
    cfg.validate()?;
    let out = train(&cfg)?;
    let dir = cfg.output_dir.as_ref().expect("set above");
    let last = out.records.iter().rev().find_map(|r| r.episodic_return_mean);
    println!(
        "trained {} on {} for {} steps; last episodic return {}; outputs in {}",
        cfg.agent,
        cfg.env,
        out.global_step,
        last.map_or("n/a".into(), |r| format!("{r:.4}")),
        dir.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let agent = load_agent(&args.checkpoint)?;
    let spec = load_env(&args.env)?;
    let mode = if args.greedy { EvalMode::Greedy } else { EvalMode::Sample };
    let summary = evaluate(&agent, &spec, args.episodes, args.seed, mode, args.gamma)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "episodes {}  mean {:.4}  std {:.4}  min {:.4}  max {:.4}",
            summary.episodes, summary.mean, summary.std, summary.min, summary.max
        );
    }
    Ok(())
}

fn run_hist(args: HistArgs) -> Result<()> {
    let agent = load_agent(&args.checkpoint)?;
    let spec = load_env(&args.env)?;
    let cfg = HistogramConfig {
        n_free: args.free,
        n_fixed: args.fixed,
        fixed_action: args.action,
        n_bins: args.bins,
        gamma: args.gamma,
        seed: args.seed,
        value_source: if args.realized { ValueSource::Realized } else { ValueSource::Critic },
    };
    let report = histogram_experiment(&agent, &spec, &cfg)?;
    let json = serde_json::to_string_pretty(&report)?;
    match args.out {
        Some(path) => {
            std::fs::write(&path, json)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let mut files = Vec::new();
    for pattern in &args.runs {
        for entry in glob::glob(pattern).with_context(|| format!("bad glob '{pattern}'"))? {
            files.push(entry?);
        }
    }
    if files.is_empty() {
        bail!("no files match {:?}", args.runs);
    }
    files.sort();
    for path in emit_plots(&files, &args.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let spec = load_env(&args.env)?;
    let stdin = io::stdin();
    serve(spec, args.seed, stdin.lock(), BufWriter::new(io::stdout().lock()))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Hist(a) => run_hist(a),
        Command::Plot(a) => run_plot(a),
        Command::ServeEnv(a) => run_serve(a),
    }
}
