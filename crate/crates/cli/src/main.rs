mod config;
mod error;
mod experiments;
mod output;
mod units;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::output::{write_manifest, Format, Manifest, Writer};

/// Default output root when --out is absent.
const OUT_ENV: &str = "CHIRALGUIDE_OUT";

#[derive(Parser)]
#[command(name = "chiralguide", version, about = "Chiral emission in a travelling-wave modulated SQUID waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration; defaults to the reference waveguide
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory [default: $CHIRALGUIDE_OUT/<command> or chiralguide-out/<command>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel jobs
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Floquet band structure over the first Brillouin zone
    Bands,
    /// Bidirectional, chiral and gap frequency windows
    Regimes,
    /// Spontaneous emission of the configured qubits
    Emit,
    /// Chirality over a grid of qubit frequencies and drive speeds
    SweepBeta,
    /// Two-node transfer, exact dynamics against the cascaded master equation
    Network,
    /// Lattice simulation and its dispersion ridges against the band structure
    Oracle,
    /// Report-only checks of the configuration
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Regimes => "regimes",
            Command::Emit => "emit",
            Command::SweepBeta => "sweep-beta",
            Command::Network => "network",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    if let Some(dir) = &cli.out {
        return dir.clone();
    }
    let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("chiralguide-out"), PathBuf::from);
    root.join(cli.command.name())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref())?;
    let dir = out_dir(cli);
    let mut out = Writer::new(&dir, cli.format)?;
    let result = match cli.command {
        Command::Bands => experiments::bands(&cfg, &mut out),
        Command::Regimes => experiments::regimes(&cfg, &mut out),
        Command::Emit => experiments::emit(&cfg, &mut out),
        Command::SweepBeta => experiments::sweep_beta(&cfg, &mut out),
        Command::Network => experiments::network(&cfg, &mut out),
        Command::Oracle => experiments::oracle(&cfg, &mut out),
        Command::Validate => experiments::validate(&cfg, &mut out),
    };
    // partial sweeps still leave a manifest for the points that ran
    if result.is_ok() || matches!(result, Err(CliError::Partial(_))) {
        finish(&dir, cli.command.name(), &cfg, &out.files, start)?;
    }
    result
}

fn finish(dir: &Path, command: &str, cfg: &config::Config, files: &[String], start: Instant) -> Result<(), CliError> {
    let manifest = Manifest {
        toolkit: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
        files,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_manifest(dir, &manifest)
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
