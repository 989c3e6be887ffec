use clap::{Parser, Subcommand};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use toeplitz_lab_cli::commands::{self, Options, Outcome};
use toeplitz_lab_cli::CliError;

#[derive(Parser)]
#[command(name = "toeplitz-lab", version, about = "Toeplitz towers, sofic approximations and entropy checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: config `output.dir`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel enumeration (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest family for which separated sets are maximized exactly.
    #[arg(long, global = true, default_value_t = 64)]
    exact_threshold: usize,
    /// Keep at most this many chain levels (overrides `depth.max_levels`).
    #[arg(long, global = true)]
    depth: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the chain and build fundamental domains.
    ChainValidate,
    /// Multiplicativity and freeness fractions plus orbit summaries.
    SoficReport,
    /// Build a Toeplitz tower for the configured kappa.
    ToeplitzBuild,
    /// Entropy rows and bound checks for a tower file.
    EntropyReport {
        #[arg(long)]
        tower: PathBuf,
    },
    /// Exact microstate and separated pseudoorbit counts.
    Microstates,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let config = cli.config.ok_or_else(|| CliError::domain("--config PATH is required"))?;
    let mut opts =
        Options { config, out: cli.out, exact_threshold: cli.exact_threshold, depth: cli.depth, tower: None };
    let go = |opts: &Options, cmd: &Command| match cmd {
        Command::ChainValidate => commands::chain_validate(opts),
        Command::SoficReport => commands::sofic_report(opts),
        Command::ToeplitzBuild => commands::toeplitz_build(opts),
        Command::EntropyReport { .. } => commands::entropy_cmd(opts),
        Command::Microstates => commands::microstates(opts),
    };
    if let Command::EntropyReport { tower } = &cli.command {
        opts.tower = Some(tower.clone());
    }
    match cli.workers {
        Some(0) => Err(CliError::domain("--workers must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Internal(e.to_string()))?;
            pool.install(|| go(&opts, &cli.command))
        }
        None => go(&opts, &cli.command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    panic::set_hook(Box::new(|info| eprintln!("internal error (this is a bug): {info}")));
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(outcome)) => {
            println!("{}", outcome.summary);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Ok(Err(e)) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(2),
    }
}
