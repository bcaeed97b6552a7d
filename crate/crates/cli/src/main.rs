mod args;
mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use commands::UsageError;

fn main() -> ExitCode {
    let argv = match config::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Label(a) => commands::label(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Attack(a) => commands::attack(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench_cmd(a),
        Command::ExportEmbeddings(a) => commands::export_embeddings(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<UsageError>() {
            Some(u) => {
                let mut cmd = Cli::command();
                let sub = cmd.find_subcommand_mut(cli.command.name()).expect("subcommand exists").clone();
                sub.bin_name(format!("adams {}", cli.command.name())).error(ErrorKind::ArgumentConflict, &u.0).exit()
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
