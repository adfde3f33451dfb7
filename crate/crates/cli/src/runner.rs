//! Orchestration of the `run` and `eval` subcommands over a dataset
//! manifest. Kept out of `main.rs` so integration tests can drive it
//! in-process.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tracksep_core::db;
use tracksep_core::envelope::interpolate_to_samples;
use tracksep_core::metrics::{self, CountVerdict, EvalReport, SourceEval};
use tracksep_core::pipeline::{run_full_pipeline, Provenance as StageProvenance};
use tracksep_core::trajectory::Trajectory;

use crate::config::RunConfig;
use crate::dataset::{self, DatasetError, DatasetManifest};
use crate::registry::{build_components, ComponentChoice, RegistryError};
use crate::report::{aggregate, AggregateReport, EntryReport, Provenance};
use crate::wav;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Wav(#[from] wav::WavError),
    #[error("manifest failed validation with {count} violations; first: {first}")]
    InvalidManifest { count: usize, first: String },
    #[error("pipeline failed on entry {entry}: {err}")]
    Pipeline {
        entry: String,
        #[source]
        err: tracksep_core::pipeline::PipelineError,
    },
    #[error("metrics failed on entry {entry}: {err}")]
    Metrics {
        entry: String,
        #[source]
        err: tracksep_core::metrics::MetricsError,
    },
    #[error("envelope reconstruction failed on entry {entry}: {err}")]
    Envelope {
        entry: String,
        #[source]
        err: tracksep_core::envelope::EnvelopeError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run output for entry {0} not found; run the pipeline first")]
    MissingRunOutput(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.display().to_string(), source }
}

/// Per-entry artifact written by `run`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub entry: String,
    pub estimated_count: usize,
    pub active_mask: Vec<bool>,
    pub estimates: Vec<String>,
    pub trajectories: Vec<String>,
    pub stages: StageProvenance,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub provenance: Provenance,
    pub config: RunConfig,
    pub entries: Vec<String>,
}

fn entry_dir_name(entry: &dataset::ManifestEntry) -> String {
    // scene files live in "scene_xxx/scene.json"; reuse the directory name.
    Path::new(&entry.scene)
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "entry".to_string())
}

fn load_and_check_manifest(manifest_path: &Path) -> Result<(DatasetManifest, PathBuf), RunnerError> {
    let manifest = dataset::load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let violations = dataset::validate_manifest(&manifest, &base);
    if !violations.is_empty() {
        return Err(RunnerError::InvalidManifest {
            count: violations.len(),
            first: violations[0].clone(),
        });
    }
    Ok((manifest, base))
}

/// Runs the configured pipeline over every dataset entry, writing the mono
/// estimates, refined trajectories and a result file per entry.
pub fn run_over_dataset(
    manifest_path: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<RunSummary, RunnerError> {
    let (manifest, base) = load_and_check_manifest(manifest_path)?;
    let choice = ComponentChoice::parse(&cfg.components)?;
    let config_bytes = serde_json::to_vec(cfg).expect("config serializes");
    let provenance = Provenance::new(cfg.seed, &cfg.components, &config_bytes);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut entry_names = Vec::new();
    for entry in &manifest.entries {
        let name = entry_dir_name(entry);
        let mixture = wav::read_foa(&base.join(&entry.mixture))?;
        let groundtruth = if choice.needs_groundtruth() {
            let spec = dataset::load_scene(&base, entry)?;
            let (_, gt) = dataset::render_entry_scene(&spec, &manifest.config)?;
            Some(Arc::new(gt))
        } else {
            None
        };
        let built = build_components(
            choice,
            groundtruth,
            tracksep_core::scene::sub_seed(cfg.seed, entry.seed),
        )?;
        let result = run_full_pipeline(&mixture, &built.components(), &cfg.pipeline_config())
            .map_err(|err| RunnerError::Pipeline { entry: name.clone(), err })?;

        let dir = out_dir.join(&name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut estimates = Vec::new();
        let mut trajectories = Vec::new();
        for (s, src) in result.sources.iter().enumerate() {
            let est_rel = format!("{name}/estimate_{s}.wav");
            wav::write_mono(&out_dir.join(&est_rel), &src.mono, mixture.sample_rate)?;
            estimates.push(est_rel);
            let traj_rel = format!("{name}/trajectory_{s}.txt");
            let mut text = String::with_capacity(src.trajectory.len() * 24);
            for d in src.trajectory.dirs() {
                text.push_str(&format!("{} {} {}\n", d[0], d[1], d[2]));
            }
            let traj_path = out_dir.join(&traj_rel);
            fs::write(&traj_path, text).map_err(io_err(&traj_path))?;
            trajectories.push(traj_rel);
        }
        let run_result = RunResult {
            entry: name.clone(),
            estimated_count: result.estimated_count,
            active_mask: result.active_mask.clone(),
            estimates,
            trajectories,
            stages: result.provenance.clone(),
            provenance: provenance.clone(),
        };
        let result_path = dir.join("result.json");
        fs::write(
            &result_path,
            serde_json::to_string_pretty(&run_result).expect("result serializes"),
        )
        .map_err(io_err(&result_path))?;
        entry_names.push(name);
    }

    let summary = RunSummary {
        provenance: provenance.clone(),
        config: cfg.clone(),
        entries: entry_names,
    };
    let summary_path = out_dir.join("run.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(io_err(&summary_path))?;
    Ok(summary)
}

/// File-based evaluation of a finished run against the dataset groundtruth.
/// Estimates are matched to sources by exhaustive search over the pairwise
/// negative-SNR costs; the per-round EWRMSAE history is only available to
/// in-process evaluation, so reports carry the final value alone.
pub fn evaluate_run(
    manifest_path: &Path,
    run_dir: &Path,
    out_dir: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<AggregateReport, RunnerError> {
    let (manifest, base) = load_and_check_manifest(manifest_path)?;
    let run_summary_path = run_dir.join("run.json");
    let summary: RunSummary = serde_json::from_str(
        &fs::read_to_string(&run_summary_path).map_err(io_err(&run_summary_path))?,
    )
    .map_err(|e| RunnerError::Io {
        path: run_summary_path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;

    let mut entry_reports = Vec::new();
    for entry in &manifest.entries {
        let name = entry_dir_name(entry);
        let result_path = run_dir.join(&name).join("result.json");
        if !result_path.exists() {
            return Err(RunnerError::MissingRunOutput(name));
        }
        let run_result: RunResult = serde_json::from_str(
            &fs::read_to_string(&result_path).map_err(io_err(&result_path))?,
        )
        .map_err(|e| RunnerError::Io {
            path: result_path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;

        let report = evaluate_entry(&base, entry, run_dir, &run_result)?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(format!("{name}.report.json"));
            fs::write(&path, serde_json::to_string_pretty(&report).expect("report"))
                .map_err(io_err(&path))?;
        }
        entry_reports.push(EntryReport { entry: name, t60: entry.t60, report });
    }

    let agg = aggregate(summary.provenance.clone(), entry_reports);
    if let Some(path) = report_path {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
        }
        fs::write(path, serde_json::to_string_pretty(&agg).expect("aggregate"))
            .map_err(io_err(path))?;
    }
    Ok(agg)
}

fn evaluate_entry(
    base: &Path,
    entry: &dataset::ManifestEntry,
    run_dir: &Path,
    run_result: &RunResult,
) -> Result<EvalReport, RunnerError> {
    let name = &run_result.entry;
    let wrap_metrics = |err| RunnerError::Metrics { entry: name.clone(), err };

    let mut gt_images = Vec::new();
    for image in &entry.images {
        gt_images.push(wav::read_mono(&base.join(image))?.0);
    }
    let mut gt_trajs = Vec::new();
    for t in &entry.trajectories {
        gt_trajs.push(dataset::read_trajectory(&base.join(t))?);
    }
    let mut gt_envs = Vec::new();
    for (e, img) in entry.envelopes.iter().zip(&gt_images) {
        let fe = dataset::read_envelope(&base.join(e))?;
        let se = interpolate_to_samples(&fe, img.len(), 0)
            .map_err(|err| RunnerError::Envelope { entry: name.clone(), err })?;
        gt_envs.push(se);
    }

    let mut estimates = Vec::new();
    let mut est_trajs = Vec::new();
    for (est_rel, traj_rel) in run_result.estimates.iter().zip(&run_result.trajectories) {
        estimates.push(wav::read_mono(&run_dir.join(est_rel))?.0);
        est_trajs.push(dataset::read_trajectory(&run_dir.join(traj_rel))?);
    }

    let n_est = estimates.len();
    let n_true = gt_images.len();
    let k = n_est.max(n_true);
    let mut cost = vec![vec![0.0f64; k]; k];
    for (i, est) in estimates.iter().enumerate() {
        for (j, img) in gt_images.iter().enumerate() {
            cost[i][j] = -metrics::snr_db(est, img).map_err(wrap_metrics)?;
        }
    }
    let (perm, _) = metrics::upit_assign(&cost).map_err(wrap_metrics)?;

    let mut per_source = Vec::new();
    let mut unassigned = Vec::new();
    let mut matched = vec![false; n_true];
    for (i, &j) in perm.iter().enumerate().take(n_est) {
        if j >= n_true {
            unassigned.push(i);
            continue;
        }
        matched[j] = true;
        let img = &gt_images[j];
        let snr = metrics::snr_db(&estimates[i], img).map_err(wrap_metrics)?;
        let si = metrics::si_snr_db(&estimates[i], img).unwrap_or(-db::CAP_DB);
        let sdr = metrics::sdr_db(&estimates[i], img, 512.min(img.len())).unwrap_or(-db::CAP_DB);
        let ew = ewrmsae_or_cap(&est_trajs[i], &gt_trajs[j], &gt_envs[j]);
        per_source.push(SourceEval {
            target: j,
            estimate: i,
            snr_db: snr,
            si_snr_db: si,
            sdr_db: sdr,
            ewrmsae_deg: ew,
            ewrmsae_rounds_deg: vec![],
        });
    }
    per_source.sort_by_key(|s| s.target);

    Ok(EvalReport {
        per_source,
        permutation: perm.into_iter().take(n_est).collect(),
        count_verdict: CountVerdict {
            true_count: n_true,
            estimated_count: run_result.estimated_count,
        },
        unassigned_estimates: unassigned,
        unmatched_targets: (0..n_true).filter(|&j| !matched[j]).collect(),
        db_cap: db::CAP_DB,
    })
}

fn ewrmsae_or_cap(
    est: &Trajectory,
    trg: &Trajectory,
    env: &tracksep_core::envelope::SampleEnvelope,
) -> f64 {
    metrics::ewrmsae_deg(est, trg, env).unwrap_or(180.0)
}
