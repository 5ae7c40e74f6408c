//! `totient` command-line driver.

mod cli;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use cli::{merge_config, Cli, Command};
use commands::{Status, UsageError};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

fn run(command: &Command) -> anyhow::Result<Status> {
    match command {
        Command::Generate(a) => commands::generate(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Attack(a) => commands::attack(a),
        Command::Plot(a) => commands::plot(a),
    }
}

fn main() -> ExitCode {
    let args = match merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command.runtime().threads {
        Some(0) => Err(UsageError("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| run(&cli.command))),
        None => run(&cli.command),
    };

    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::BudgetExhausted) => ExitCode::from(EXIT_EXHAUSTED),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}
