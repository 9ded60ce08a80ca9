use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixedbo::acquisition::OptBudget;
use mixedbo::bo_engine::EngineConfig;
use mixedbo::harness::{
    default_grid_density, emit_outputs, parse_strategies, read_history, run_experiment, suggest_next, summarize,
    write_records, ExperimentConfig, ObjectiveSource, StrategyKind,
};
use mixedbo::kernels::KernelFamily;
use mixedbo::search_space::SearchSpace;
use mixedbo::synthetic::Layout;

#[derive(Parser)]
#[command(name = "mixedbo", version, about = "Bayesian optimization over mixed real, integer and categorical spaces")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run paired benchmark repetitions and write records, summary and plot.
    Run(RunArgs),
    /// Print the next configuration to evaluate as one JSON line.
    Suggest(SuggestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Matern32,
    Se,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Matern32 => KernelFamily::Matern32,
            KernelArg::Se => KernelFamily::SquaredExponential,
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Hyperparameter samples averaged in the acquisition.
    #[arg(long, default_value_t = 10)]
    hyper_samples: usize,
    /// Covariance family of the GP strategies.
    #[arg(long, value_enum, default_value = "matern32")]
    kernel: KernelArg,
    /// Random points scored before local search of the acquisition.
    #[arg(long, default_value_t = 1000)]
    acq_samples: usize,
}

impl EngineArgs {
    fn engine(&self) -> EngineConfig {
        EngineConfig {
            family: self.kernel.into(),
            hyper_samples: self.hyper_samples,
            budget: OptBudget {
                n_random: self.acq_samples,
                ..OptBudget::default()
            },
            ..EngineConfig::default()
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("objective").required(true).args(["layout", "space"])))]
struct RunArgs {
    /// Benchmark layout: 2d-int, 2d-cat, 4d-int or 4d-cat.
    #[arg(long, value_parser = parse_layout)]
    layout: Option<Layout>,
    /// Search space JSON file; objectives are GP draws unless --objective-cmd is given.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Shell command reading a JSON config on stdin and printing the objective.
    #[arg(long, requires = "space")]
    objective_cmd: Option<String>,
    /// Comma-separated subset of naive, basic, proposed, tpe, random.
    #[arg(long, default_value = "basic,proposed,tpe")]
    strategies: String,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    repetitions: usize,
    /// Variance of the Gaussian observation noise on synthetic objectives.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Bootstrap resamples for the error bars.
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SuggestArgs {
    /// Search space JSON file.
    #[arg(long)]
    space: PathBuf,
    /// CSV with eval_config_json and observed_y columns.
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value = "proposed")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    engine: EngineArgs,
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    s.parse().map_err(|e: mixedbo::Error| e.to_string())
}

fn load_space(path: &Path) -> anyhow::Result<SearchSpace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SearchSpace::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let source = match (args.layout, &args.space, args.objective_cmd) {
        (Some(l), None, None) => ObjectiveSource::Layout(l),
        (None, Some(p), None) => {
            let space = load_space(p)?;
            let grid_density = default_grid_density(&space);
            ObjectiveSource::Space { space, grid_density }
        }
        (None, Some(p), Some(command)) => ObjectiveSource::External {
            space: load_space(p)?,
            command,
        },
        _ => bail!("give exactly one of --layout or --space"),
    };
    let mut cfg = ExperimentConfig::new(source, parse_strategies(&args.strategies)?);
    cfg.iterations = args.iterations;
    cfg.repetitions = args.repetitions;
    cfg.noise_variance = args.noise;
    cfg.bootstrap_samples = args.bootstrap;
    cfg.seed = args.seed;
    cfg.engine = args.engine.engine();

    let outcome = run_experiment(&cfg)?;
    for f in &outcome.failures {
        eprintln!("run failed: strategy {} repetition {}: {}", f.strategy, f.repetition, f.message);
    }
    if cfg.source.is_external() {
        std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let path = args.out.join("records.csv");
        write_records(&outcome.records, &path)?;
        println!("{}", path.display());
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(7);
        match summarize(&outcome.records, cfg.bootstrap_samples, &mut rng) {
            Ok(summary) => {
                for p in emit_outputs(&summary, &outcome.records, &args.out)? {
                    println!("{}", p.display());
                }
            }
            Err(e) => {
                std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
                write_records(&outcome.records, &args.out.join("records.csv"))?;
                eprintln!("no summary written: {e}");
            }
        }
    }
    Ok(if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn suggest(args: SuggestArgs) -> anyhow::Result<ExitCode> {
    let space = Arc::new(load_space(&args.space)?);
    let history = read_history(&args.history).with_context(|| format!("reading {}", args.history.display()))?;
    let strategy: StrategyKind = args.strategy.parse()?;
    let engine = args.engine.engine();
    let next = suggest_next(&space, &history, strategy, &engine, &Default::default(), args.seed)?;
    println!("{}", next.to_json());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::Suggest(a) => suggest(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
