//! `iest`: the command-line pipeline.
//!
//! preprocess → gen-data → train → predict → ensemble → evaluate / analyze,
//! plus `sweep` for ablation grids and data-amount curves.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERICAL: u8 = 4;
}

/// A bad invocation that clap itself cannot detect.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    use iest::Error as E;
    if err.downcast_ref::<Usage>().is_some() {
        return exit::USAGE;
    }
    match err.downcast_ref::<E>() {
        Some(E::Config(_) | E::InvalidArgument(_)) => exit::USAGE,
        Some(E::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => exit::USAGE,
        Some(E::Data { .. } | E::Format { .. } | E::Empty(_)) => exit::DATA,
        Some(E::NonFinite { .. } | E::NonFiniteOutput(_)) => exit::NUMERICAL,
        _ => exit::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::FAILURE);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
