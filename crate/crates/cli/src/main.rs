mod cli;
mod commands;
mod config;
mod io;
mod svg;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use commands::RunContext;

const EXIT_COMPUTATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

enum Failure {
    Usage(String),
    Computation(anyhow::Error),
    Clap(clap::Error),
}

fn run(args: Vec<OsString>, depth: u8) -> Result<(), Failure> {
    let args = config::expand(args).map_err(|e| Failure::Usage(format!("{e:#}")))?;
    let cli = Cli::try_parse_from(&args).map_err(Failure::Clap)?;
    let ctx = RunContext {
        argv: &args,
        started: io::unix_now(),
    };
    let result = match &cli.command {
        Command::Equilibrium(a) => commands::equilibrium(a, &ctx),
        Command::Simulate(a) => commands::simulate(a, &ctx),
        Command::Ode(a) => commands::ode(a, &ctx),
        Command::Exact(a) => commands::exact(a, &ctx),
        Command::Compare(a) => commands::compare(a),
        Command::Replay(a) => {
            if depth > 0 {
                return Err(Failure::Usage("nested replay".into()));
            }
            let argv = commands::replay_args(a).map_err(Failure::Computation)?;
            return run(argv, depth + 1);
        }
    };
    result.map_err(Failure::Computation)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect(), 0) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Computation(e)) if e.downcast_ref::<commands::UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Computation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_COMPUTATION)
        }
    }
}
