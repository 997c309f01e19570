mod args;
mod error;
mod jobs;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use freqbias::exec::init_threads;
use freqbias::Exec;

use args::{Cli, Command};
use error::Result;
use jobs::Job;
use output::{Artifacts, RunManifest};

fn run(cli: &Cli) -> Result<()> {
    let (job, seed) = match &cli.command {
        Command::Replay { manifest } => {
            let m = RunManifest::load(manifest)?;
            (Job::from_parts(&m.subcommand, m.config)?, m.seed)
        }
        other => (other.resolve(cli.seed)?.expect("non-replay commands resolve to a job"), cli.seed),
    };
    let exec = if cli.threads == 1 {
        Exec::Serial
    } else {
        if cli.threads > 1 {
            init_threads(cli.threads);
        }
        Exec::Parallel
    };

    let start = Instant::now();
    let mut out = Artifacts::new(&cli.out_dir);
    job.run(&mut out, exec)?;
    let manifest = RunManifest {
        subcommand: job.name().to_string(),
        config: job.config_value()?,
        seed,
        threads: cli.threads,
        artifacts: out.written().to_vec(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    let path = out.json(&RunManifest::file_name(job.name()), &manifest)?;
    eprintln!("[freqbias] wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freqbias: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
