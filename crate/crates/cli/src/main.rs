use std::process::ExitCode;

use clap::Parser;

mod args;
mod error;
mod gen;
mod hashing;
mod manifest;
mod sparsify;
mod verify_cmd;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => gen::run(args).map(|()| true),
        Command::Sparsify(args) => sparsify::run(args).map(|()| true),
        Command::Verify(args) => verify_cmd::run(args),
        Command::Replay(args) => sparsify::replay(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            e.exit_code()
        }
    }
}
