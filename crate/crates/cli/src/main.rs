mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "rgpe", version, about = "Rotating Gross-Pitaevskii solver in rotating Lagrangian coordinates")]
struct Cli {
    /// Print the scheme registry and exit.
    #[arg(long)]
    list_schemes: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one run and write snapshots.
    Simulate(RunArgs),
    /// Convergence study against a fine reference, written as CSV.
    Converge(RunArgs),
    /// Errors of each method against itself at a tenth of the step, as CSV.
    SelfConverge(RunArgs),
    /// Dense Magnus and classical-trajectory checks.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// Analytic trap gradient against finite differences.
    GradientCheck {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Scheme names, orders, stage counts and coefficient checksums.
    ListSchemes,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Config file (TOML).
    #[arg(value_name = "CONFIG")]
    config_file: Option<PathBuf>,
    #[arg(long = "config", value_name = "PATH", conflicts_with = "config_file")]
    config: Option<PathBuf>,
    /// Comma-separated method descriptors such as cf4+rkn74.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Step count for `simulate`; comma-separated step counts for studies.
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    dim: Option<u8>,
    /// Output directory; falls back to $RGPE_OUT, then the config, then ./rgpe-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.list_schemes, cli.command) {
        (true, _) | (false, Some(Command::ListSchemes)) => commands::list_schemes(),
        (false, Some(Command::Simulate(a))) => commands::simulate(&a),
        (false, Some(Command::Converge(a))) => commands::converge(&a),
        (false, Some(Command::SelfConverge(a))) => commands::self_converge(&a),
        (false, Some(Command::OracleCheck { seed })) => commands::oracle_check(seed),
        (false, Some(Command::GradientCheck { run, samples })) => commands::gradient_check(&run, samples),
        (false, None) => Err(Failure::usage("no subcommand given; see --help")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
