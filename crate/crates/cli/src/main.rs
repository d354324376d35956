//! `ggd`: dataset generation, training, evaluation and reporting.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

// glibc malloc hands the large per-batch activation buffers back to the
// kernel and faults them in again on every step.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn init_logging() -> Result<(), String> {
    let level = match std::env::var("GGD_LOG").as_deref() {
        Err(_) | Ok("info") => log::LevelFilter::Info,
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => return Err(format!("GGD_LOG must be quiet, info or debug, got {other:?}")),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_logging() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
