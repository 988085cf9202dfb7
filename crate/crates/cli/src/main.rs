use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use eirm_cli::config::{ExperimentConfig, Preset, DATA_DIR_VAR};
use eirm_cli::run::{run_experiment, RunOptions};
use eirm_cli::theory_cmd::{self, CheckpointInput, TheoryReport};
use eirm_cli::{gen, CliError};

/// Exit status for a theory check that ran and failed.
const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for invalid input: bad flags, config or paths.
const EXIT_USAGE: u8 = 2;
/// Exit status for failures while running.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "eirm", version, about = "Ensemble invariant risk minimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured method on every seed and write result tables.
    Run {
        config: PathBuf,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corpus directory; defaults to $EIRM_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Equilibrium and invariance checks.
    Theory {
        #[command(subcommand)]
        check: TheoryCommand,
    },
    /// Write a benchmark's environments to binary cache files.
    Gen {
        /// colored_digits, colored_fashion, colored_shapes or patch_fashion.
        benchmark: String,
        #[arg(long, value_delimiter = ',', default_value = "2000,2000,2000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        flip_probs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 16)]
        canvas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct QuadArgs {
    #[arg(long, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, allow_negative_numbers = true)]
    c2: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Half-width of the strategy box.
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CheckpointArgs {
    /// Model checkpoint written by `run`.
    #[arg(long, required_unless_present = "sem")]
    checkpoint: Option<PathBuf>,
    /// Config the checkpoint was trained with.
    #[arg(long, required_unless_present = "sem")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Certify a model trained on the built-in linear SEM instead.
    #[arg(long)]
    sem: bool,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Enumerate equilibria of a two-player scalar quadratic game on a grid.
    Grid(QuadArgs),
    /// Clamped best responses on a bounded linear game.
    Bounded(QuadArgs),
    /// Check that no player gains by retraining its own classifier.
    Nash {
        #[command(flatten)]
        args: CheckpointArgs,
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Check that no sampled classifier beats the ensemble on any environment.
    Invariance {
        #[command(flatten)]
        args: CheckpointArgs,
        #[arg(long, default_value_t = 100)]
        n_perturb: usize,
        #[arg(long, default_value_t = 100)]
        retrain_steps: usize,
    },
}

fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CliError>() {
        Some(CliError::Config { .. } | CliError::Parse(_) | CliError::MissingPath(_)) => EXIT_USAGE,
        Some(CliError::Core(eirm_core::Error::Config(_))) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn data_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(DATA_DIR_VAR).map(PathBuf::from))
}

fn finish(report: TheoryReport, out: Option<PathBuf>) -> anyhow::Result<u8> {
    print!("{}", report.text());
    if let Some(dir) = out {
        report.save(&dir)?;
    }
    Ok(if report.pass { 0 } else { EXIT_CHECK_FAILED })
}

fn theory(check: TheoryCommand) -> anyhow::Result<u8> {
    match check {
        TheoryCommand::Grid(q) => {
            let hi = q.hi.unwrap_or(if q.c1 == q.c2 { 1.0 } else { 2.0 });
            finish(theory_cmd::grid(q.c1, q.c2, hi, q.step)?, q.out)
        }
        TheoryCommand::Bounded(q) => finish(theory_cmd::bounded(q.c1, q.c2, q.hi.unwrap_or(1.0), q.step)?, q.out),
        TheoryCommand::Nash { args, budget } => {
            let report = if args.sem {
                theory_cmd::nash_sem(args.seed, budget, args.lr, args.eps)?
            } else {
                let input = checkpoint_input(&args);
                theory_cmd::nash(&input, budget, args.lr, args.eps)?
            };
            finish(report, args.out)
        }
        TheoryCommand::Invariance { args, n_perturb, retrain_steps } => {
            anyhow::ensure!(!args.sem, "--sem is only available for `theory nash`");
            let input = checkpoint_input(&args);
            finish(theory_cmd::invariance(&input, n_perturb, retrain_steps, args.lr, args.eps)?, args.out)
        }
    }
}

fn checkpoint_input(args: &CheckpointArgs) -> CheckpointInput<'_> {
    CheckpointInput {
        checkpoint: args.checkpoint.as_deref().expect("clap requires --checkpoint"),
        config: args.config.as_deref().expect("clap requires --config"),
        seed: args.seed,
        data_dir: data_dir(args.data_dir.clone()),
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, preset, seed_offset, out, data_dir: dir } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(p) = preset {
                cfg.apply_preset(p);
            }
            let opts = RunOptions {
                seed_offset,
                out_dir: out,
                data_dir: data_dir(dir),
                preset: preset.map(|p| format!("{p:?}").to_lowercase()),
                quiet: false,
            };
            let result = run_experiment(&cfg, &opts)?;
            print!("{}", result.table.to_markdown());
            eprintln!("artifacts in {}", result.out_dir.display());
            Ok(0)
        }
        Command::Theory { check } => theory(check),
        Command::Gen { benchmark, sizes, flip_probs, canvas, seed, data_dir: dir, out } => {
            let mut cfg = ExperimentConfig::from_toml(&format!("[benchmark]\nname = {benchmark:?}\n"))?;
            cfg.benchmark.sizes = sizes;
            if let Some(p) = flip_probs {
                cfg.benchmark.flip_probs = p;
            }
            cfg.benchmark.canvas = canvas;
            for path in gen::generate(&cfg, seed, data_dir(dir).as_deref(), &out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_for(&err))
        }
    }
}
