use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};

use cyclobloch_cli::{parse_config, resolve_threads, run, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Spectrum,
    PhasePortrait,
    TransportState,
    Evolve,
    #[value(name = "scan-A")]
    ScanA,
    Perturb,
    Classify,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Subcommand::Spectrum,
            Command::PhasePortrait => Subcommand::PhasePortrait,
            Command::TransportState => Subcommand::TransportState,
            Command::Evolve => Subcommand::Evolve,
            Command::ScanA => Subcommand::ScanA,
            Command::Perturb => Subcommand::Perturb,
            Command::Classify => Subcommand::Classify,
        }
    }
}

/// Spectra, classical phase portraits and wave-packet dynamics on a square
/// lattice in crossed electric and magnetic fields.
#[derive(Debug, Parser)]
#[command(name = "cyclobloch", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Plain-text `key=value` configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; falls back to CYCLOBLOCH_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Global seed of the incoherent phases.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(n) = resolve_threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let text = std::fs::read_to_string(&cli.config).with_context(|| format!("reading {}", cli.config.display()))?;
    let spec = parse_config(&text, cli.command.into(), cli.seed).with_context(|| format!("in {}", cli.config.display()))?;
    for path in run(&spec, &cli.out)? {
        println!("{}", path.display());
    }
    Ok(())
}
