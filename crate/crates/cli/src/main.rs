use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evinc::cli::{self, Command, Invocation, EXIT_INVALID};

/// Numerical experiments for controlled evolution inclusions.
#[derive(Parser, Debug)]
#[command(name = "evinc", version)]
struct Args {
    /// One of: solve, sample-set, filippov, optimize, sweep, continuity,
    /// usc, qliminf, pgconv, validate.
    command: String,
    /// Run configuration (JSON).
    config: PathBuf,
    /// Output directory; defaults to ./out/<command>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the run configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    verbose: bool,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command: Command = match args.command.parse() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("evinc: {e}");
            return code(EXIT_INVALID);
        }
    };
    match cli::workers_from_env() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("evinc: cannot configure {n} workers: {e}");
                return code(EXIT_INVALID);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("evinc: {e}");
            return code(EXIT_INVALID);
        }
    }
    let inv = Invocation {
        command,
        out: args.out.unwrap_or_else(|| cli::default_out_dir(command)),
        config: args.config,
        seed: args.seed,
        verbose: args.verbose,
    };
    code(cli::run(&inv))
}
