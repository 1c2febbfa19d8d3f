//! `riemann-ep`: config-driven runner for equilibrium problems on manifolds.

mod config;
mod descriptor;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run::Overrides;

#[derive(Parser)]
#[command(name = "riemann-ep", version, about = "Solve equilibrium problems on Riemannian manifolds")]
#[command(after_help = "Exit codes: 0 converged (or all checks passed), 1 config or runtime error, \
2 iteration budget exhausted, 3 step condition violated, 4 a verification check failed.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the proximal point solver and write trace.csv and summary.json.
    Run {
        /// Experiment config (TOML).
        #[arg(required_unless_present = "batch", conflicts_with = "batch")]
        config: Option<PathBuf>,
        /// Also run the checks in [verify] and write report.txt.
        #[arg(long)]
        verify: bool,
        /// Run every *.toml in DIR concurrently; outputs go to <out>/<config stem>.
        #[arg(long, value_name = "DIR")]
        batch: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run only the checks in [verify] and write report.txt.
    Verify {
        /// Experiment config (TOML).
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Seed for sampling; overrides solver.seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides output.dir (default out/<config stem>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Outer iteration budget; overrides solver.max_outer_iters.
    #[arg(long, value_name = "N")]
    max_iters: Option<usize>,
    /// Suppress warnings and the summary line.
    #[arg(long)]
    quiet: bool,
}

impl From<Common> for Overrides {
    fn from(c: Common) -> Self {
        Self {
            seed: c.seed,
            max_iters: c.max_iters,
            out: c.out,
            quiet: c.quiet,
        }
    }
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run {
            config,
            verify,
            batch,
            common,
        } => {
            let ov = Overrides::from(common);
            match (batch, config) {
                (Some(dir), _) => run::batch(&dir, &ov, verify),
                (None, Some(path)) => run::run(&path, &ov, verify),
                (None, None) => unreachable!("clap requires a config or --batch"),
            }
        }
        Command::Verify { config, common } => run::verify(&config, &Overrides::from(common)),
    };
    ExitCode::from(code as u8)
}
