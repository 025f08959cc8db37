//! Manifest-driven runs of the transmission pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtp::codec::TransmitMode;
use qtp::error::{ConfigError, QtpError};
use qtp::manifest::RunManifest;
use qtp::pipeline::{self, default_length_buckets, LengthBucket, OutputFormat};
use qtp::quantum::ChannelKind;

#[derive(Parser)]
#[command(name = "qtp", about = "Noisy superdense-coding text transmission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Override the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the channel, as KIND:LAMBDA (e.g. bit_flip:0.01).
    #[arg(long)]
    channel: Option<String>,
    /// Override the transport mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TransmitMode>,
    /// Force segmentation on.
    #[arg(long, overrides_with = "no_segment")]
    segment: bool,
    /// Force segmentation off.
    #[arg(long)]
    no_segment: bool,
    /// Override the maximum words per transmission unit.
    #[arg(long)]
    max_unit: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Report format.
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Transmit a corpus and emit per-unit transcripts plus a report.
    Transmit(CommonArgs),
    /// Generate a noisy corpus, train the repair model, write a checkpoint.
    Train(CommonArgs),
    /// Metric grid over noise strengths, modes, and replicates.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated noise strengths.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Comma-separated transport modes.
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Vec<TransmitMode>,
    },
    /// Error-localization quality on the held-out test split.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated noise kinds to evaluate.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        kinds: Vec<ChannelKind>,
    },
    /// Sentence error rate bucketed by sentence length.
    Lengthscan {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated buckets like 1-4,5-16,17+.
        #[arg(long, value_delimiter = ',', value_parser = parse_bucket)]
        buckets: Vec<LengthBucket>,
    },
}

fn parse_mode(s: &str) -> Result<TransmitMode, String> {
    TransmitMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (classical|qubit|qudit4)"))
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    OutputFormat::parse(s).ok_or_else(|| format!("unknown format {s:?} (json|csv)"))
}

fn parse_kind(s: &str) -> Result<ChannelKind, String> {
    ChannelKind::parse(s).ok_or_else(|| format!("unknown channel kind {s:?}"))
}

fn parse_bucket(s: &str) -> Result<LengthBucket, String> {
    LengthBucket::parse(s).ok_or_else(|| format!("bad bucket {s:?} (use LO-HI or LO+)"))
}

fn load_manifest(common: &CommonArgs) -> Result<RunManifest, QtpError> {
    let mut man = RunManifest::load(&common.manifest)?;
    if let Some(seed) = common.seed {
        man.seed = seed;
    }
    if let Some(spec) = &common.channel {
        let (kind, lambda) = spec
            .split_once(':')
            .ok_or_else(|| ConfigError::InvalidField {
                field: "--channel".into(),
                reason: format!("{spec:?} is not KIND:LAMBDA"),
            })?;
        let kind = ChannelKind::parse(kind).ok_or_else(|| ConfigError::InvalidField {
            field: "--channel".into(),
            reason: format!("unknown kind {kind:?}"),
        })?;
        let lambda: f64 = lambda.parse().map_err(|_| ConfigError::InvalidField {
            field: "--channel".into(),
            reason: format!("bad lambda {lambda:?}"),
        })?;
        man.channel = qtp::quantum::ChannelConfig::new(kind, lambda, kind.dimension().unwrap_or(2));
    }
    if let Some(mode) = common.mode {
        man.mode = mode;
    }
    if common.segment {
        man.segmentation = true;
    }
    if common.no_segment {
        man.segmentation = false;
    }
    if let Some(max_unit) = common.max_unit {
        man.max_unit = max_unit;
    }
    Ok(man)
}

fn run() -> Result<(), QtpError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Transmit(common) => {
            let man = load_manifest(&common)?;
            let artifacts = pipeline::run_transmit(&man, &common.out, common.format)?;
            println!("manifest {}", artifacts.manifest_hash);
            println!("transcript {}", artifacts.transcript_path.display());
            println!("report {}", artifacts.report_path.display());
            pipeline::print_summary(&mut std::io::stdout(), &artifacts.report).ok();
        }
        Command::Train(common) => {
            let man = load_manifest(&common)?;
            let artifacts = pipeline::run_train(&man, &common.out)?;
            println!("manifest {}", artifacts.manifest_hash);
            println!("checkpoint {}", artifacts.checkpoint_path.display());
            println!("history {}", artifacts.history_path.display());
            if let Some(loss) = artifacts.final_loss {
                println!("final_loss {loss}");
            }
        }
        Command::Sweep {
            common,
            lambdas,
            modes,
        } => {
            let man = load_manifest(&common)?;
            if lambdas.is_empty() || modes.is_empty() {
                return Err(ConfigError::InvalidField {
                    field: "--lambdas/--modes".into(),
                    reason: "at least one value each".into(),
                }
                .into());
            }
            let artifacts = pipeline::run_sweep(&man, &lambdas, &modes, &common.out)?;
            println!("manifest {}", artifacts.manifest_hash);
            println!(
                "sweep {} ({} rows)",
                artifacts.csv_path.display(),
                artifacts.rows.len()
            );
        }
        Command::Detect { common, kinds } => {
            let man = load_manifest(&common)?;
            let kinds = if kinds.is_empty() {
                vec![
                    ChannelKind::BitFlip,
                    ChannelKind::PhaseFlip,
                    ChannelKind::Depolarizing,
                    ChannelKind::AmplitudeDamping,
                ]
            } else {
                kinds
            };
            let artifacts = pipeline::run_detect(&man, &kinds, &common.out)?;
            println!("manifest {}", artifacts.manifest_hash);
            println!("detect {}", artifacts.report_path.display());
            for row in &artifacts.report.rows {
                println!(
                    "{} lambda={} detection={}",
                    row.kind,
                    row.lambda,
                    qtp::report::na(row.report.detection_probability),
                );
            }
        }
        Command::Lengthscan { common, buckets } => {
            let man = load_manifest(&common)?;
            let buckets = if buckets.is_empty() {
                default_length_buckets()
            } else {
                buckets
            };
            let artifacts = pipeline::run_lengthscan(&man, &buckets, &common.out)?;
            println!("manifest {}", artifacts.manifest_hash);
            println!("lengthscan {}", artifacts.csv_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
