use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use xbm_cli::artifacts::seed_dir;
use xbm_cli::commands::{cmd_eval, cmd_table, cmd_topology, cmd_train, run_seeds};
use xbm_cli::{exit, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "xbm", version, about = "Sparse scale-free Boltzmann machine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of independent seeds to run; each writes to `<out>/seed-<s>`.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Worker threads for multi-seed runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replace existing artifacts that differ.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a topology and its diagnostics.
    Topology(RunArgs),
    /// Train the configured model family.
    Train(RunArgs),
    /// Evaluate a trained checkpoint.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Aggregate reports into a CSV table.
    Table {
        /// Report files or directories searched for `report.json`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig::load(config)?.resolved(seed))
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn run_many<F>(args: RunArgs, job: F) -> Result<(), CliError>
where
    F: Fn(&ExperimentConfig, &Path, bool) -> Result<(), CliError> + Sync,
{
    let base = load(&args.config, args.seed)?;
    let out = out_dir(&base, args.out);
    if args.runs <= 1 {
        return job(&base, &out, args.force);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<Result<(), CliError>> = pool.install(|| {
        run_seeds(base.seed, args.runs)
            .into_par_iter()
            .map(|seed| {
                let cfg = base.clone().resolved(Some(seed));
                job(&cfg, &seed_dir(&out, seed), args.force)
            })
            .collect()
    });
    results.into_iter().find(Result::is_err).unwrap_or(Ok(()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Topology(args) => run_many(args, |cfg, out, force| {
            let d = cmd_topology(cfg, out, force)?;
            println!(
                "{}: {}x{} with {} edges (ratio {:.2}), L = {:.3}, C = {:.3}",
                out.display(),
                d.n_visible,
                d.n_hidden,
                d.edges,
                d.ratio,
                d.avg_shortest_path,
                d.clustering_coefficient
            );
            Ok(())
        }),
        Command::Train(args) => run_many(args, |cfg, out, force| {
            let s = cmd_train(cfg, out, force)?;
            println!(
                "{}: trained {} with {} edges over {} epochs",
                out.display(),
                s.artifact.model_name,
                s.manifest.run.edge_count,
                s.artifact.checkpoint.epoch
            );
            Ok(())
        }),
        Command::Eval {
            config,
            model,
            seed,
            out,
            force,
        } => {
            let cfg = load(&config, seed)?;
            let out = out_dir(&cfg, out);
            let r = cmd_eval(&cfg, &model, &out, force)?;
            println!("{}", serde_json::to_string_pretty(&r.report).expect("report serializes"));
            Ok(())
        }
        Command::Table { reports, out, force } => {
            let table = cmd_table(&reports)?;
            match out {
                Some(path) => xbm_cli::artifacts::write_artifact(&path, table.as_bytes(), force),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("xbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
