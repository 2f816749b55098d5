use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Regions(a) => commands::regions(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Tomo(a) => commands::tomo(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Discriminate(a) => commands::discriminate(a),
        Command::OpticsCheck(a) => commands::optics_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
