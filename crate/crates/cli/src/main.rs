mod args;
mod commands;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};
use manifest::RunManifest;

const LOG_ENV: &str = "SKILLTUNE_LOG";

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let (name, out) = match &cli.command {
        Command::Demo(a) => ("demo", &a.out.out),
        Command::Train(a) => ("train", &a.out.out),
        Command::Compare(a) => ("compare", &a.out.out),
        Command::Rollout(a) => ("rollout", &a.out.out),
        Command::Gradcheck(a) => ("gradcheck", &a.out.out),
    };
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let outcome = match &cli.command {
        Command::Demo(a) => commands::demo(a),
        Command::Train(a) => commands::train(a),
        Command::Compare(a) => commands::compare(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    }?;
    let manifest = RunManifest::new(name, outcome.config, outcome.seed, out, &outcome.outputs, start.elapsed())?;
    let path = manifest.write(out)?;
    log::info!("{name} finished in {:.1} s; manifest {}", manifest.wall_clock_s, path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
