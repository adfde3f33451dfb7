use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tracksep_cli::config::{GenConfig, RunConfig};
use tracksep_cli::dataset::generate_dataset;
use tracksep_cli::report::{render_table, Provenance};
use tracksep_cli::runner::{evaluate_run, run_over_dataset};
use tracksep_cli::wav;

#[derive(Parser)]
#[command(name = "tracksep", version, about = "Moving-source FOA separation: dataset generation, pipeline runs and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset of moving-source FOA scenes.
    Gen {
        /// Output directory for the dataset and its manifest.
        #[arg(long)]
        out: PathBuf,
        /// Generation config (JSON); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; the dataset is a pure function of it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; the output is identical for any value.
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Run the separation pipeline over a dataset.
    Run {
        /// Dataset manifest produced by `gen`.
        manifest: PathBuf,
        /// Output directory for per-entry estimates and results.
        #[arg(long)]
        out: PathBuf,
        /// Run config (JSON); flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Component set: classical, oracle or oracle-noisy.
        #[arg(long)]
        components: Option<String>,
        /// Mutual-facilitation rounds.
        #[arg(long)]
        rounds: Option<usize>,
        /// Maximum number of sources.
        #[arg(long = "c-max")]
        c_max: Option<usize>,
        /// Source-count threshold on normalized envelope peaks.
        #[arg(long)]
        threshold: Option<f64>,
        /// Seed for component-internal randomness.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a finished run against the dataset groundtruth.
    Eval {
        /// Dataset manifest produced by `gen`.
        manifest: PathBuf,
        /// Run directory produced by `run`.
        run_dir: PathBuf,
        /// Directory for per-entry report files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Path for the aggregate report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Metrics between two audio files (reference channel of multichannel
    /// input).
    Metrics {
        estimate: PathBuf,
        reference: PathBuf,
        /// Optional JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Filter length for the projection SDR.
        #[arg(long, default_value_t = 512)]
        sdr_filter_len: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Single-line machine-parsable error on the diagnostic stream.
            let message = format!("{e:#}");
            eprintln!("{}", serde_json::json!({ "error": message }));
            ExitCode::FAILURE
        }
    }
}

fn load_json_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen { out, config, seed, parallelism } => {
            let cfg: GenConfig = load_json_config(&config)?;
            let manifest = generate_dataset(&cfg, &out, seed, parallelism)?;
            println!(
                "wrote {} scenes to {} (manifest: {})",
                manifest.entries.len(),
                out.display(),
                out.join(tracksep_cli::dataset::MANIFEST_FILE).display()
            );
            Ok(())
        }
        Command::Run { manifest, out, config, components, rounds, c_max, threshold, seed } => {
            let mut cfg: RunConfig = load_json_config(&config)?;
            if let Some(c) = components {
                cfg.components = c;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            if let Some(c) = c_max {
                cfg.c_max = c;
            }
            if let Some(t) = threshold {
                cfg.count_threshold = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let summary = run_over_dataset(&manifest, &out, &cfg)?;
            println!(
                "ran {} entries with '{}' components into {}",
                summary.entries.len(),
                summary.provenance.components,
                out.display()
            );
            Ok(())
        }
        Command::Eval { manifest, run_dir, out, report } => {
            let agg = evaluate_run(&manifest, &run_dir, out.as_deref(), report.as_deref())?;
            print!("{}", render_table(&agg));
            Ok(())
        }
        Command::Metrics { estimate, reference, report, sdr_filter_len } => {
            let est = read_reference_channel(&estimate)?;
            let rf = read_reference_channel(&reference)?;
            anyhow::ensure!(
                est.len() == rf.len(),
                "signals differ in length: {} vs {}",
                est.len(),
                rf.len()
            );
            let snr = tracksep_core::metrics::snr_db(&est, &rf)?;
            let si = tracksep_core::metrics::si_snr_db(&est, &rf)?;
            let sdr =
                tracksep_core::metrics::sdr_db(&est, &rf, sdr_filter_len.min(rf.len()))?;
            println!("SNR:    {snr:8.2} dB");
            println!("SI-SNR: {si:8.2} dB");
            println!("SDR:    {sdr:8.2} dB");
            if let Some(path) = report {
                let provenance = Provenance::new(0, "metrics", b"metrics");
                let body = serde_json::json!({
                    "estimate": estimate.display().to_string(),
                    "reference": reference.display().to_string(),
                    "snr_db": snr,
                    "si_snr_db": si,
                    "sdr_db": sdr,
                    "sdr_filter_len": sdr_filter_len,
                    "db_cap": tracksep_core::db::CAP_DB,
                    "provenance": provenance,
                });
                std::fs::write(&path, serde_json::to_string_pretty(&body)?)
                    .with_context(|| format!("writing report {}", path.display()))?;
            }
            Ok(())
        }
    }
}

/// Mono samples of a file: mono files load directly, multichannel files
/// contribute their first (reference) channel.
fn read_reference_channel(path: &PathBuf) -> Result<Vec<f64>> {
    let data = wav::read_wav(path)?;
    let ch = data.channels as usize;
    anyhow::ensure!(ch > 0, "file has no channels");
    Ok(data
        .samples
        .chunks_exact(ch)
        .map(|frame| frame[0] as f64)
        .collect())
}
