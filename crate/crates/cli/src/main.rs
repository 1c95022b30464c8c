mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gumbel_sketch::{Estimator, HarmonicNorm, Variant};

/// Distinct-count sketches with Gumbel-distributed registers.
///
/// Exit status: 0 ok, 1 a validation check failed, 2 usage error,
/// 3 I/O or sketch-file error.
#[derive(Debug, Parser)]
#[command(name = "gumbel-sketch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a sketch file from newline-delimited items.
    Sketch(SketchArgs),
    /// Estimate the distinct count of a sketch file or of a stream.
    Estimate(EstimateArgs),
    /// Merge two or more compatible sketch files.
    Merge(MergeArgs),
    /// Run the full validation suite and report one row per check.
    Validate(ValidateArgs),
    /// Run one Monte Carlo error experiment, or emit max-of-n histograms.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Number of registers.
    #[arg(short, long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Hash seed, decimal or 0x-prefixed hex.
    #[arg(short, long, default_value = "0", value_parser = parse_seed)]
    seed: u64,
    /// Sketch variant: full-replication (fr), stochastic-averaging (sa) or
    /// discretized-sa (discrete).
    #[arg(long, default_value = "discretized-sa", value_parser = parse_variant)]
    variant: Variant,
}

#[derive(Debug, Args)]
struct SketchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Input file with one item per line; `-` or absent reads standard input.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Sketch file to write; absent writes standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Sketch file; with --from-stream, a file of items instead. `-` or
    /// absent reads standard input.
    input: Option<PathBuf>,
    /// Treat the input as newline-delimited items and sketch them first.
    #[arg(long)]
    from_stream: bool,
    /// Number of registers (with --from-stream).
    #[arg(short, long, requires = "from_stream", value_parser = clap::value_parser!(u32).range(1..))]
    k: Option<u32>,
    /// Hash seed (with --from-stream).
    #[arg(short, long, requires = "from_stream", value_parser = parse_seed)]
    seed: Option<u64>,
    /// Sketch variant. For a sketch file, the file's variant must match.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(short, long, default_value = "harmonic", value_parser = parse_estimator)]
    estimator: Estimator,
    /// Harmonic normalization for discretized sketches: moment (default),
    /// published, offset=<a> or scale=<s>.
    #[arg(long, value_parser = parse_norm)]
    harmonic_norm: Option<HarmonicNorm>,
    #[arg(short, long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Sketch files to merge.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    /// Merged sketch file; absent writes standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Stream size for the stochastic-averaging experiments.
    #[arg(long)]
    n: Option<u64>,
    /// Register count for the stochastic-averaging experiments.
    #[arg(short, long, value_parser = clap::value_parser!(u32).range(1..))]
    k: Option<u32>,
    /// Trials per sketch experiment (at least 30).
    #[arg(long, value_parser = clap::value_parser!(u32).range(30..))]
    trials: Option<u32>,
    #[arg(short, long, default_value = "0", value_parser = parse_seed)]
    seed: u64,
    /// Reduced budget: smaller sketches, streams and sample counts.
    #[arg(long)]
    quick: bool,
    #[arg(short, long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "discretized-sa", value_parser = parse_variant)]
    variant: Variant,
    #[arg(short, long, default_value = "harmonic", value_parser = parse_estimator)]
    estimator: Estimator,
    /// Distinct items per trial; with --emit-histogram, draws per maximum.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(short, long, default_value_t = 1024, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Independent sketch builds (at least 30).
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(30..))]
    trials: u32,
    #[arg(short, long, default_value = "0", value_parser = parse_seed)]
    seed: u64,
    #[arg(long, value_parser = parse_norm)]
    harmonic_norm: Option<HarmonicNorm>,
    /// Emit histograms of the maximum of n draws (Gumbel and geometric)
    /// with their reference distributions instead of running an experiment.
    #[arg(long)]
    emit_histogram: bool,
    /// Maxima drawn per histogram.
    #[arg(long, default_value_t = 100_000, requires = "emit_histogram")]
    samples: usize,
    #[arg(short, long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    parsed.map_err(|e| format!("`{s}`: {e}"))
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_str(s).map_err(|e| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::from_str(s).map_err(|e| e.to_string())
}

fn parse_norm(s: &str) -> Result<HarmonicNorm, String> {
    let value = |v: &str| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    match s.split_once('=') {
        None if s == "published" => Ok(HarmonicNorm::PUBLISHED),
        None if s == "moment" => Ok(HarmonicNorm::MOMENT_MATCHED),
        Some(("offset", v)) => Ok(HarmonicNorm::Offset(value(v)?)),
        Some(("scale", v)) => {
            let s = value(v)?;
            if s > 0.0 && s.is_finite() {
                Ok(HarmonicNorm::Scale(s))
            } else {
                Err(format!("scale must be positive, got {s}"))
            }
        }
        _ => Err(format!(
            "unknown normalization `{s}` (expected moment, published, offset=<a> or scale=<s>)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sketch(args) => commands::sketch(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Merge(args) => commands::merge(args),
        Command::Validate(args) => commands::validate(args),
        Command::Simulate(args) => commands::simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gumbel-sketch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
