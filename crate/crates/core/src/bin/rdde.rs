use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdde::harness::{run, validate_config, RunStatus, VERSION};

/// Lyapunov spectra of random linear delay equations.
#[derive(Parser)]
#[command(name = "rdde", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the driver and the probe block (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 3 when a `compare` or `oracle` check fails.
    #[arg(long)]
    strict: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

fn run_command(args: RunArgs) -> ExitCode {
    let mut cfg = match validate_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let out = args
        .out
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let manifest = match run(&cfg, &out) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    if manifest.status == RunStatus::NumericalFailure {
        eprintln!("error: {}", manifest.error.as_deref().unwrap_or("numerical failure"));
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if args.strict && manifest.passed == Some(false) {
        eprintln!("check failed; see the report in {}", out.display());
        return ExitCode::from(EXIT_CHECK_FAILED);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run_command(args),
        Command::Validate { config } => match validate_config(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Version => {
            println!("rdde {VERSION}");
            ExitCode::SUCCESS
        }
    }
}
