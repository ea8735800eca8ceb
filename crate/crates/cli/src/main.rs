//! Binary entry point: dispatch to the subcommands and map error
//! variants onto stable exit codes (0 ok, 2 usage, 3 data, 4 numeric).

mod cli;
mod commands;
mod config;

use clap::Parser;
use graspgrad::error::Error;

use cli::{Cli, Command};

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Format(_) | Error::Io(_) => 3,
        Error::Numeric(_) | Error::NonFinite(_) | Error::State(_) | Error::Shape { .. } => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => commands::cmd_gen_data(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Plan(args) => commands::cmd_plan(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::PlotData(args) => commands::cmd_plot_data(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
