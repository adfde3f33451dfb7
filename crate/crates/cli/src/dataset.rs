//! Dataset generation and the manifest that indexes it.
//!
//! Each entry renders one sampled scene and persists the mixture (4-channel
//! float WAV), the clean zeroth-order image of every source (mono WAV), the
//! groundtruth direction trajectory (text, one `x y z` row per sample), the
//! groundtruth frame envelope (text) and the scene file itself. Generation
//! is a pure function of the master seed, independent of parallelism.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tracksep_core::acoustics::{render_scene, RenderedScene};
use tracksep_core::envelope::FrameEnvelope;
use tracksep_core::estimators::SceneGroundtruth;
use tracksep_core::frame::FrameConfig;
use tracksep_core::scene::{sample_scene, sub_seed, SceneSpec, SourceAudio};
use tracksep_core::trajectory::Trajectory;
use tracksep_core::vec3::Vec3;

use crate::config::GenConfig;
use crate::wav;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Wav(#[from] wav::WavError),
    #[error("scene sampling failed: {0}")]
    Scene(#[from] tracksep_core::scene::SceneError),
    #[error("rendering failed: {0}")]
    Acoustics(#[from] tracksep_core::acoustics::AcousticsError),
    #[error("groundtruth construction failed: {0}")]
    Estimator(#[from] tracksep_core::estimators::EstimatorError),
    #[error("bad manifest {path}: {reason}")]
    BadManifest { path: String, reason: String },
    #[error("source audio file {path} has {got} samples, scene needs {want}")]
    SourceLength { path: String, got: usize, want: usize },
    #[error("malformed {what} file {path} at line {line}")]
    BadTextFile { what: &'static str, path: String, line: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene: String,
    pub mixture: String,
    pub images: Vec<String>,
    pub trajectories: Vec<String>,
    pub envelopes: Vec<String>,
    pub seed: u64,
    pub t60: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub config: GenConfig,
    pub entries: Vec<ManifestEntry>,
}

/// Resolves every source's dry signal: synthetic sources are synthesized,
/// file-backed sources are loaded and length-checked.
pub fn resolve_source_signals(spec: &SceneSpec) -> Result<Vec<Vec<f64>>, DatasetError> {
    spec.sources
        .iter()
        .map(|s| {
            let n = s.trajectory.n_samples;
            match &s.audio {
                SourceAudio::Synthetic { .. } => {
                    Ok(s.audio.synthesize(n, spec.sample_rate).expect("synthetic"))
                }
                SourceAudio::File(path) => {
                    let p = Path::new(path);
                    let (samples, _fs) = wav::read_mono(p)?;
                    if samples.len() != n {
                        return Err(DatasetError::SourceLength {
                            path: path.clone(),
                            got: samples.len(),
                            want: n,
                        });
                    }
                    Ok(samples)
                }
            }
        })
        .collect()
}

/// Renders a scene spec with the dataset's render settings; used both at
/// generation time and when a run needs to reconstruct groundtruth.
pub fn render_entry_scene(
    spec: &SceneSpec,
    cfg: &GenConfig,
) -> Result<(RenderedScene, SceneGroundtruth), DatasetError> {
    let signals = resolve_source_signals(spec)?;
    let rendered = render_scene(spec, &signals, &cfg.render.to_render_config(spec.sample_rate))?;
    let gt = SceneGroundtruth::from_rendered(
        &rendered,
        spec.room.array_center,
        FrameConfig::default(),
    )?;
    Ok((rendered, gt))
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), DatasetError> {
    let mut out = String::with_capacity(traj.len() * 24);
    for d in traj.dirs() {
        out.push_str(&format!("{} {} {}\n", d[0], d[1], d[2]));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut dirs: Vec<Vec3> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let mut row = [0.0f64; 3];
        for v in &mut row {
            *v = it
                .next()
                .and_then(|tok| tok.parse().ok())
                .ok_or_else(|| DatasetError::BadTextFile {
                    what: "trajectory",
                    path: path.display().to_string(),
                    line: i + 1,
                })?;
        }
        dirs.push(row);
    }
    Trajectory::from_dirs(dirs).map_err(|e| DatasetError::BadTextFile {
        what: "trajectory",
        path: path.display().to_string(),
        line: match e {
            tracksep_core::trajectory::TrajectoryError::NotUnit { row, .. } => row + 1,
            _ => 0,
        },
    })
}

fn write_envelope(path: &Path, env: &FrameEnvelope) -> Result<(), DatasetError> {
    let mut out = String::with_capacity(env.frames() * 12 + 32);
    out.push_str(&format!("# win={} hop={}\n", env.win, env.hop));
    for v in &env.values {
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_envelope(path: &Path) -> Result<FrameEnvelope, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize| DatasetError::BadTextFile {
        what: "envelope",
        path: path.display().to_string(),
        line,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1))?;
    let mut win = 0usize;
    let mut hop = 0usize;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("win=") {
            win = v.parse().map_err(|_| bad(1))?;
        } else if let Some(v) = tok.strip_prefix("hop=") {
            hop = v.parse().map_err(|_| bad(1))?;
        }
    }
    if win == 0 || hop == 0 {
        return Err(bad(1));
    }
    let mut values = Vec::new();
    for (i, line) in lines {
        values.push(line.trim().parse().map_err(|_| bad(i + 1))?);
    }
    Ok(FrameEnvelope { values, win, hop })
}

fn generate_entry(
    index: usize,
    master_seed: u64,
    cfg: &GenConfig,
    out_dir: &Path,
) -> Result<ManifestEntry, DatasetError> {
    let scene_seed = sub_seed(master_seed, 0x0DA7_A000 + index as u64);
    let spec = sample_scene(scene_seed, &cfg.ranges)?;
    let (rendered, gt) = render_entry_scene(&spec, cfg)?;

    let dir_name = format!("scene_{index:03}");
    let entry_dir = out_dir.join(&dir_name);
    fs::create_dir_all(&entry_dir).map_err(io_err(&entry_dir))?;

    let scene_rel = format!("{dir_name}/scene.json");
    let scene_path = out_dir.join(&scene_rel);
    let scene_json = serde_json::to_string_pretty(&spec).expect("scene serializes");
    fs::write(&scene_path, scene_json).map_err(io_err(&scene_path))?;

    let mixture_rel = format!("{dir_name}/mixture.wav");
    wav::write_foa(&out_dir.join(&mixture_rel), &rendered.mixture)?;

    let mut images = Vec::new();
    let mut trajectories = Vec::new();
    let mut envelopes = Vec::new();
    for s in 0..spec.sources.len() {
        let image_rel = format!("{dir_name}/image_{s}.wav");
        wav::write_mono(
            &out_dir.join(&image_rel),
            rendered.images[s].omni(),
            spec.sample_rate,
        )?;
        images.push(image_rel);

        let traj_rel = format!("{dir_name}/trajectory_{s}.txt");
        write_trajectory(&out_dir.join(&traj_rel), &gt.trajectories[s])?;
        trajectories.push(traj_rel);

        let env_rel = format!("{dir_name}/envelope_{s}.txt");
        write_envelope(&out_dir.join(&env_rel), &gt.frame_envelopes[s])?;
        envelopes.push(env_rel);
    }

    Ok(ManifestEntry {
        scene: scene_rel,
        mixture: mixture_rel,
        images,
        trajectories,
        envelopes,
        seed: scene_seed,
        t60: spec.room.t60,
    })
}

/// Generates the whole dataset; entries are produced in parallel but the
/// result is identical for any parallelism because every entry depends only
/// on the master seed and its index.
pub fn generate_dataset(
    cfg: &GenConfig,
    out_dir: &Path,
    master_seed: u64,
    parallelism: usize,
) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<ManifestEntry, DatasetError>> = pool.install(|| {
        use rayon::prelude::*;
        (0..cfg.n_scenes)
            .into_par_iter()
            .map(|i| generate_entry(i, master_seed, cfg, out_dir))
            .collect()
    });
    let mut entries = Vec::with_capacity(cfg.n_scenes);
    for r in results {
        entries.push(r?);
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        master_seed,
        config: cfg.clone(),
        entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    file.write_all(serde_json::to_string_pretty(&manifest).expect("manifest").as_bytes())
        .map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::BadManifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(DatasetError::BadManifest {
            path: path.display().to_string(),
            reason: format!(
                "format version {} unsupported (expected {MANIFEST_VERSION})",
                manifest.format_version
            ),
        });
    }
    Ok(manifest)
}

pub fn load_scene(base: &Path, entry: &ManifestEntry) -> Result<SceneSpec, DatasetError> {
    let path = base.join(&entry.scene);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::BadManifest {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Shape checks over every entry: referenced files exist, the mixture is
/// 4-channel, images are mono, and lengths agree with the trajectories.
/// Returns all violations found, as strings.
pub fn validate_manifest(manifest: &DatasetManifest, base: &Path) -> Vec<String> {
    let mut violations = Vec::new();
    let mut seeds = std::collections::HashSet::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        if !seeds.insert(entry.seed) {
            violations.push(format!("entry {i}: duplicate seed {}", entry.seed));
        }
        let all_files = std::iter::once(&entry.scene)
            .chain(std::iter::once(&entry.mixture))
            .chain(entry.images.iter())
            .chain(entry.trajectories.iter())
            .chain(entry.envelopes.iter());
        let mut missing = false;
        for f in all_files {
            if !base.join(f).exists() {
                violations.push(format!("entry {i}: missing file {f}"));
                missing = true;
            }
        }
        if missing {
            continue;
        }
        let mixture = match wav::read_foa(&base.join(&entry.mixture)) {
            Ok(m) => m,
            Err(e) => {
                violations.push(format!("entry {i}: {e}"));
                continue;
            }
        };
        for (s, traj_file) in entry.trajectories.iter().enumerate() {
            match read_trajectory(&base.join(traj_file)) {
                Ok(traj) => {
                    if traj.len() != mixture.len() {
                        violations.push(format!(
                            "entry {i}: mixture has {} samples but trajectory {s} has {}",
                            mixture.len(),
                            traj.len()
                        ));
                    }
                }
                Err(e) => violations.push(format!("entry {i}: {e}")),
            }
        }
        for (s, image_file) in entry.images.iter().enumerate() {
            match wav::read_mono(&base.join(image_file)) {
                Ok((samples, _)) => {
                    if samples.len() != mixture.len() {
                        violations.push(format!(
                            "entry {i}: image {s} has {} samples, mixture {}",
                            samples.len(),
                            mixture.len()
                        ));
                    }
                }
                Err(e) => violations.push(format!("entry {i}: {e}")),
            }
        }
    }
    violations
}
