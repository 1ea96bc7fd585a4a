use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(
    name = "usbench",
    version,
    about = "Synthesize, run and benchmark ultrasound RF-to-image pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate point scatterers and write an RFB1 file.
    Synth(SynthArgs),
    /// Run one forward pass and write the image(s).
    Run(RunArgs),
    /// Benchmark one or more pipelines and print a report.
    Bench(BenchArgs),
    /// Render saved benchmark results as a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output RFB1 file.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// RFB1 input file.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Synthesize the input from the configuration instead of reading a file.
    #[arg(long)]
    synth: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    source: Source,
    /// Beamformer: gather, full-cnn or sparse.
    #[arg(long)]
    variant: Option<String>,
    /// Modality: bmode, color-doppler or power-doppler.
    #[arg(long)]
    modality: Option<String>,
    /// Output prefix; writes <out>.pgm and <out>.f32.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

impl From<Format> for usbench_core::bench::ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => Self::Csv,
            Format::Markdown => Self::Markdown,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    source: Source,
    /// Comma-separated beamformers, or `all`.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated modalities, or `all`.
    #[arg(long)]
    modality: Option<String>,
    /// Untimed passes before timing.
    #[arg(long)]
    warmup: Option<usize>,
    /// Timed passes.
    #[arg(long)]
    iters: Option<usize>,
    /// Shell command printing one wattage reading per line.
    #[arg(long, conflicts_with_all = ["power_trace", "no_energy"])]
    power_cmd: Option<String>,
    /// Power trace file of `t_seconds watts` lines; negative times form the idle window.
    #[arg(long, conflicts_with = "no_energy")]
    power_trace: Option<PathBuf>,
    /// Fixed idle baseline instead of a measured one.
    #[arg(long)]
    idle_watts: Option<f64>,
    /// Length of the idle measurement for --power-cmd, seconds.
    #[arg(long, default_value_t = 2.0)]
    idle_secs: f64,
    /// Skip energy measurement.
    #[arg(long)]
    no_energy: bool,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    /// Also write the results as JSON for `usbench report`.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// JSON files written by `usbench bench --save`.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Run(a) => commands::run(a),
        Command::Bench(a) => commands::bench(a),
        Command::Report(a) => commands::report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.exit_code())
        }
    }
}
