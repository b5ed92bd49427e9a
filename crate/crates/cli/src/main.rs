use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cachepart_cli::{builtin, figures, resolve_scenario, CliError, CliResult, Overrides};

#[derive(Parser)]
#[command(name = "cachepart", version, about = "Utility-driven partitioning of a shared LRU cache")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or built-in scenario name) and write trace.csv and summary.csv.
    Run {
        scenario: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Reproduce a figure's data as CSV files.
    Reproduce {
        /// One of fig3, fig4a, fig4b, fig5 (fig5-sweeps), fig6, fig7, fig8, fig9, counterexample.
        figure: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Parse and validate a scenario without running it.
    Validate { scenario: String },
}

#[derive(Args)]
struct Flags {
    /// Random seed for simulated requests.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Optimizer KKT tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Controller iterations for online scenarios, optimizer iterations otherwise.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, tol: self.tol, max_iters: self.max_iters }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { scenario, flags } => {
            let mut s = resolve_scenario(&scenario)?;
            flags.overrides().apply(&mut s);
            let dir = flags.out_dir.clone().or_else(|| s.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out").join(&s.name));
            let (out, paths) = cachepart_cli::run_to_dir(&s, &dir)?;
            for p in paths {
                println!("{}", p.display());
            }
            if !out.converged {
                return Err(CliError::NotConverged(s.name));
            }
            Ok(())
        }
        Command::Reproduce { figure, flags } => {
            let dir = flags.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            for p in cachepart_cli::reproduce_to_dir(&figure, &flags.overrides(), &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::ListScenarios => {
            for name in builtin::names() {
                let s = builtin::load(name)?;
                println!("{name:<30} {:<18} {}", format!("{:?}", s.mode), s.description);
            }
            println!();
            println!("figures: {}", figures::FIGURES.join(", "));
            Ok(())
        }
        Command::Validate { scenario } => {
            let s = resolve_scenario(&scenario)?;
            s.validate()?;
            println!("{}: ok", s.name);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
