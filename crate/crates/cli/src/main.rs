use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxrisk_cli::commands;
use maxrisk_cli::config::RunConfig;
use maxrisk_cli::CliError;

#[derive(Parser)]
#[command(
    name = "maxrisk",
    version,
    about = "Spatial risk of powers of max-stable fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Dependence measure over distance and power.
    Depsurface,
    /// Variance of the aggregated loss against the region scale.
    R2curves,
    /// Asymptotic mean, VaR and ES of the aggregated loss.
    Riskreport,
    /// Simulate fields and summarize the empirical loss distribution.
    Simulate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulate.seed = seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let text = pool.install(|| -> Result<String, CliError> {
        Ok(match cli.command {
            Command::Depsurface => commands::depsurface(&cfg.depsurface)?,
            Command::R2curves => commands::r2curves(&cfg.r2curves)?,
            Command::Riskreport => commands::riskreport(&cfg.riskreport)?,
            Command::Simulate => {
                let out = commands::simulate(&cfg.simulate)?;
                if cfg.simulate.dump {
                    if let Some(path) = &cli.out {
                        commands::write_dump(&commands::dump_path(path), &out.samples)?;
                    }
                }
                out.summary
            }
        })
    })?;
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
