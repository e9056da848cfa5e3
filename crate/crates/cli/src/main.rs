use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use featrank_cli::{run, CliError, Command, Format, RunConfig};

/// Feature ranking, complexity and faithfulness pipelines.
#[derive(Debug, Parser)]
#[command(name = "featrank", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical CPU count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "all", global = true)]
    format: Format,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match try_main(args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn try_main(args: Args) -> Result<Vec<PathBuf>, CliError> {
    let path = args
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path, args.seed)?;
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    }
    run(args.command, &cfg, args.format)
}
