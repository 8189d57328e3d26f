mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Compare(a) => commands::compare(a),
        Command::SweepTrees(a) => commands::sweep_trees(a),
        Command::Bayesopt(a) => commands::bayesopt(a),
        Command::LogicDemo(a) => commands::logic_demo(a),
        Command::ExportDot(a) => commands::export_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
