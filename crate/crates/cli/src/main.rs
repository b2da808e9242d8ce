mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use config::FileConfig;
use error::{CliError, ErrorKind};

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx::new(cli.seed, cli.out, file);
    match &cli.command {
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Kappa(a) => commands::kappa(&ctx, a),
        Command::Analyze(a) => commands::analyze(&ctx, a),
        Command::Freq(a) => commands::freq(&ctx, a),
        Command::EmbedTrain(a) => commands::embed_train(&ctx, a),
        Command::Project2d(a) => commands::project2d(&ctx, a),
        Command::Vectorize(a) => commands::vectorize(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Cv(a) => commands::cv(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Transfer(a) => commands::transfer(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as Clap;
            if matches!(e.kind(), Clap::DisplayHelp | Clap::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError {
                kind: ErrorKind::Config,
                message: e.to_string().trim_end().to_string(),
            };
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
