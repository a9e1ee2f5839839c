use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpbvp_cli::config::{MeasureConfig, ProblemConfig};
use mpbvp_cli::{cmd_approximate, cmd_nbv_approx, cmd_perturb, cmd_solve, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "mpbvp", version, about = "Linear BVPs with general boundary operators and their multipoint approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Sample count for solution files and C^(n) norms.
    #[arg(long)]
    grid: Option<usize>,
    /// Integrator relative tolerance (overrides MPBVP_RTOL and the config).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem and write solution.csv.
    Solve(Common),
    /// Convergence study over the schedule; writes convergence.csv.
    Approximate {
        #[command(flatten)]
        common: Common,
        /// Also write the multipoint node tables to nodes.csv.
        #[arg(long)]
        dump_nodes: bool,
    },
    /// Perturbation experiment; writes perturbation.csv.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Epsilon values (comma separated); defaults to schedule.epsilons.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Step-approximate a standalone measure; writes nbv_atoms.csv and nbv_metrics.csv.
    NbvApprox(Common),
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    let opts = |c: &Common| RunOptions {
        out: c.out.clone(),
        grid: c.grid,
        tol: c.tol,
    };
    match cli.command {
        Command::Solve(c) => cmd_solve(&ProblemConfig::load(&c.config)?, &opts(&c)),
        Command::Approximate { common, dump_nodes } => {
            cmd_approximate(&ProblemConfig::load(&common.config)?, &opts(&common), dump_nodes)
        }
        Command::Perturb { common, eps } => cmd_perturb(&ProblemConfig::load(&common.config)?, &opts(&common), &eps),
        Command::NbvApprox(c) => cmd_nbv_approx(&MeasureConfig::load(&c.config)?, &opts(&c)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
