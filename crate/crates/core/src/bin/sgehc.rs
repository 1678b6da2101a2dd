use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgehc::config::{resolve_path, ApproxConfig, RunConfig};
use sgehc::experiments::{approx_check, approx_csv, dump_nodes, enumerate, run_solve};
use sgehc::Error;

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  internal error
  2  command-line usage error
  3  configuration error (parse or validation)
  4  invalid argument or point outside the domain
  5  numerical failure (singular or ill-conditioned system, basis too small)
  6  file system error";

#[derive(Parser)]
#[command(name = "sgehc", version, about = "Hyperbolic-cross collocation solver for sine-Gordon equations", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads (also read from SGE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured solve; writes the error report and the resolved config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Interpolate a test function on one box over a ladder of K values.
    ApproxCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Count (and optionally list) a hyperbolic-cross index set.
    Enumerate {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        lambda: f64,
        /// The order cap K.
        #[arg(long = "order")]
        k: f64,
        /// Largest number of nonzero entries.
        #[arg(long)]
        cap: Option<usize>,
        /// Print every index with its weight and order.
        #[arg(long)]
        list: bool,
    },
    /// Write the node set of a configured run as CSV.
    DumpNodes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "nodes.csv")]
        file: String,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 3,
        Error::InvalidArgument(_) | Error::EmptySet { .. } | Error::OutOfDomain { .. } => 4,
        Error::IllConditioned { .. } | Error::InsufficientBasis { .. } | Error::StepFailure { .. } => 5,
        Error::Io { .. } => 6,
        Error::Internal(_) => 1,
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("SGE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| Error::Config {
            message: format!("SGE_THREADS must be a positive integer, got '{v}'"),
            line: None,
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let run = run_solve(&cfg, &out, cli.verbose)?;
            println!("{}", run.report_path.display());
        }
        Command::ApproxCheck { config, out } => {
            let cfg = ApproxConfig::load(&config)?;
            let rows = approx_check(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let path = resolve_path(&out, &cfg.report);
            let csv = approx_csv(&rows);
            std::fs::write(&path, &csv).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            print!("{csv}");
        }
        Command::Enumerate {
            dim,
            lambda,
            k,
            cap,
            list,
        } => {
            let (count, text) = enumerate(dim, lambda, k, cap, list)?;
            print!("{text}");
            println!("{count}");
        }
        Command::DumpNodes { config, out, file } => {
            let cfg = RunConfig::load(&config)?;
            let path = resolve_path(&out, &file);
            let n = dump_nodes(&cfg, &path)?;
            if cli.verbose {
                eprintln!("{n} nodes written");
            }
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
