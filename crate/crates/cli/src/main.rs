//! `linkforge`: embedding-based entity linking with cluster-editing repair.

mod commands;
mod config;
mod stage;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkforge_core::classifier::DEFAULT_EPSILON;
use linkforge_core::editing::{SolverOptions, DEFAULT_NODE_BUDGET};
use linkforge_core::{FeatureSpec, GeneratorConfig};

use crate::commands::{ClassifyArgs, ClosureArgs, RepairArgs, SweepArgs};
use crate::config::PipelineConfig;
use crate::stage::{fail, Outcome, Stage};

#[derive(Parser)]
#[command(name = "linkforge", version, about = "Link duplicate entities across knowledge graphs")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "LINKFORGE_JOBS")]
    jobs: Option<usize>,

    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark with known duplicate clusters.
    Generate(GenerateOpts),
    /// Write the symmetric kNN candidate pairs of an embeddings file.
    Candidates {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the pair classifier on labeled pairs.
    Train {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = FeatureSpec::Cosine)]
        feature: FeatureSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score pairs with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        /// Labeled pairs whose scores are replaced by 1-ε or ε.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transitive closure of the tentative linkset at a cutoff.
    Closure {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 50)]
        max_component: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the links as owl:sameAs triples.
        #[arg(long)]
        same_as: Option<PathBuf>,
    },
    /// Repair the tentative linkset by exact weighted cluster editing.
    Repair(RepairOpts),
    /// Evaluate closure and repair over the cutoff grid on a benchmark.
    Sweep {
        #[arg(long)]
        benchmark_dir: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Fails unless it matches the model's feature map.
        #[arg(long)]
        feature: Option<FeatureSpec>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        max_component: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run every stage from a config file.
    Pipeline(PipelineOpts),
}

#[derive(Args)]
struct GenerateOpts {
    #[arg(long, default_value_t = GeneratorConfig::default().n_base)]
    n_base: usize,
    #[arg(long, default_value_t = GeneratorConfig::default().n_subgraphs)]
    subgraphs: usize,
    #[arg(long, default_value_t = GeneratorConfig::default().sample_rate)]
    rate: f64,
    #[arg(long, default_value_t = GeneratorConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = GeneratorConfig::default().noise_sigma)]
    noise: f64,
    #[arg(long, default_value_t = GeneratorConfig::default().cluster_sep)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RepairOpts {
    /// Pair scores; pairs without a score count as ε unless a model is given.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, requires = "embeddings")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Neighbours per entity when candidates come from the model.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 50)]
    max_component: usize,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    same_as: Option<PathBuf>,
    /// Per-component solver report, one JSON object per line.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineOpts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn pipeline_config(opts: &PipelineOpts) -> Outcome<PipelineConfig> {
    let mut cfg = match &opts.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for entry in &opts.overrides {
        match entry.split_once('=') {
            Some((k, v)) => cfg.set(k.trim(), v.trim())?,
            None => return fail(Stage::Config, format!("expected KEY=VALUE, got `{entry}`")),
        }
    }
    if let Some(dir) = &opts.out_dir {
        cfg.out_dir = dir.clone();
    }
    if opts.theta.is_some() {
        cfg.theta = opts.theta;
    }
    if opts.sweep {
        cfg.sweep = true;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn solver(node_budget: u64) -> SolverOptions {
    SolverOptions {
        node_budget,
        ..SolverOptions::default()
    }
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Generate(o) => {
            let cfg = GeneratorConfig {
                n_base: o.n_base,
                n_subgraphs: o.subgraphs,
                sample_rate: o.rate,
                dim: o.dim,
                noise_sigma: o.noise,
                cluster_sep: o.sep,
                seed: o.seed,
            };
            commands::generate(&cfg, &o.out_dir)
        }
        Command::Candidates { embeddings, k, out } => commands::candidates(&embeddings, k, &out),
        Command::Train {
            embeddings,
            labels,
            feature,
            seed,
            model_out,
        } => commands::train_model(&embeddings, &labels, feature, seed, &model_out),
        Command::Classify {
            model,
            embeddings,
            pairs,
            labels,
            epsilon,
            out,
        } => commands::classify(&ClassifyArgs {
            model: &model,
            embeddings: &embeddings,
            pairs: &pairs,
            labels: labels.as_deref(),
            epsilon,
            out: &out,
        }),
        Command::Closure {
            scores,
            labels,
            theta,
            max_component,
            epsilon,
            out,
            same_as,
        } => commands::closure(&ClosureArgs {
            scores: &scores,
            labels: labels.as_deref(),
            theta,
            max_component,
            epsilon,
            out: &out,
            same_as: same_as.as_deref(),
        }),
        Command::Repair(o) => commands::repair_links(&RepairArgs {
            scores: o.scores.as_deref(),
            model: o.model.as_deref(),
            embeddings: o.embeddings.as_deref(),
            labels: o.labels.as_deref(),
            k: o.k,
            theta: o.theta,
            max_component: o.max_component,
            epsilon: o.epsilon,
            solver: solver(o.node_budget),
            out: &o.out,
            same_as: o.same_as.as_deref(),
            report: o.report.as_deref(),
        }),
        Command::Sweep {
            benchmark_dir,
            model,
            feature,
            labels,
            k,
            max_component,
            epsilon,
            node_budget,
            out_dir,
        } => commands::sweep_command(&SweepArgs {
            benchmark_dir: &benchmark_dir,
            model: &model,
            feature,
            labels: &labels,
            k,
            max_component,
            epsilon,
            solver: solver(node_budget),
            out_dir: &out_dir,
        }),
        Command::Pipeline(o) => commands::pipeline(&pipeline_config(&o)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("linkforge: config stage failed: --jobs must be positive");
            return ExitCode::from(Stage::Config.exit_code() as u8);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("global thread pool is built once");
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("linkforge: {failure}");
            ExitCode::from(failure.stage.exit_code() as u8)
        }
    }
}
