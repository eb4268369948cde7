use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use eventclock_cli::{execute, Experiment, Format};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    SpinRun,
    ZenoSweep,
    Detect,
    Commutators,
    ArrivalEvolve,
    ArrivalBackflow,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

/// Measurement-time experiments: detector models, repeated measurement and
/// arrival currents.
#[derive(Parser)]
#[command(name = "eventclock", version)]
struct Args {
    #[arg(value_enum)]
    experiment: Cmd,
    /// Flat JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides output_path in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides format in the config (default csv).
    #[arg(long, value_enum)]
    format: Option<Fmt>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let experiment = match args.experiment {
        Cmd::SpinRun => Experiment::SpinRun,
        Cmd::ZenoSweep => Experiment::ZenoSweep,
        Cmd::Detect => Experiment::Detect,
        Cmd::Commutators => Experiment::Commutators,
        Cmd::ArrivalEvolve => Experiment::ArrivalEvolve,
        Cmd::ArrivalBackflow => Experiment::ArrivalBackflow,
    };
    let format = args.format.map(|f| match f {
        Fmt::Csv => Format::Csv,
        Fmt::Json => Format::Json,
    });
    match execute(experiment, &args.config, args.out.as_deref(), format) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eventclock: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
