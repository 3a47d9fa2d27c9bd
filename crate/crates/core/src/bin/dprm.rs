use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dprm_core::harness::{self, ExperimentConfig, ExperimentKind, OutputFormat};

#[derive(Parser)]
#[command(
    name = "dprm",
    version,
    about = "Directed polymers on trees and random tree codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo free energy per step against its n → ∞ limit
    DprmConverge(Common),
    /// Limiting free energy on a β grid, with finite differences
    PhaseScan(Common),
    /// Encode a source sequence with a random tree code
    Encode(Common),
    /// Decode a bitstream written by `encode`
    Decode(Common),
    /// Blahut-Arimoto rate-distortion curve
    RdCurve(Common),
    /// Compare D₀(ln d) with D(ln d), optionally with an ensemble trajectory
    VerifyTheorem(Common),
    /// Ensemble distortion of random tree codes under exact encoding
    Ensemble(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output` from the config, else `.`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (advisory; results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::DprmConverge(c) => (ExperimentKind::DprmConverge, c),
            Command::PhaseScan(c) => (ExperimentKind::PhaseScan, c),
            Command::Encode(c) => (ExperimentKind::Encode, c),
            Command::Decode(c) => (ExperimentKind::Decode, c),
            Command::RdCurve(c) => (ExperimentKind::RdCurve, c),
            Command::VerifyTheorem(c) => (ExperimentKind::VerifyTheorem, c),
            Command::Ensemble(c) => (ExperimentKind::Ensemble, c),
        }
    }
}

fn execute(kind: ExperimentKind, args: &Common) -> dprm_core::Result<i32> {
    if let Some(n) = args.threads {
        // a pool may already exist when embedded; the flag is advisory
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    let output = harness::run(&config, kind)?;
    let format = match args.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let dir = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    for path in output.write(&config, &dir, format)? {
        eprintln!("wrote {}", path.display());
    }
    println!(
        "{kind}: {}",
        serde_json::to_value(output.status)?.as_str().unwrap_or("?")
    );
    Ok(output.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
