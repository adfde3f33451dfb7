//! Classical DSP implementations of the component contracts: pseudo-intensity
//! DOA tracking, steered first-order (cardioid) extraction and a
//! direction-clustering envelope splitter.

use crate::acoustics::{FoaSignal, CH_W, CH_X, CH_Y, CH_Z};
use crate::envelope::{extract_envelope, FrameEnvelope, SampleEnvelope};
use crate::frame::FrameConfig;
use crate::trajectory::{FramedIntensityTrajectory, Trajectory};
use crate::vec3::{self, Vec3};

use super::{EnvelopeEstimator, EstimatorError, Extractor, RefinementExtractor, Tracker};

/// Frames whose envelope falls below this amplitude inherit the direction of
/// the nearest confident frame.
pub const ENV_CONFIDENCE: f64 = 1e-3;
/// Minimum direction coherence for a frame to count as single-source-like.
/// A lone plane wave scores exactly 1; overlapping sources decohere.
pub const COHERENCE_GATE: f64 = 0.7;
/// Minimum ratio of the target envelope to the tracked signal's own envelope
/// for a frame to count as target-dominated.
pub const DOMINANCE_GATE: f64 = 0.5;

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / len as f64).cos()))
        .collect()
}

struct FrameIntensity {
    /// Broadband intensity vector per frame.
    vecs: Vec<Vec3>,
    /// Norm of the summed vector over the summed per-sample magnitudes:
    /// 1 when every sample points the same way, small under overlap.
    coherence: Vec<f64>,
}

/// Per-frame broadband acoustic intensity vectors: the windowed products of
/// the omni channel with the three dipole channels, summed over each frame.
/// By Parseval this equals the frequency-summed real cross-spectrum of the
/// corresponding STFT frames, i.e. the broadband time-frequency intensity.
fn frame_intensity_vectors(signal: &FoaSignal, frame: FrameConfig) -> Option<FrameIntensity> {
    let t_frames = frame.frame_count(signal.len())?;
    let w2: Vec<f64> = hann(frame.win).into_iter().map(|w| w * w).collect();
    let (w, x, y, z) = (
        signal.channel(CH_W),
        signal.channel(CH_X),
        signal.channel(CH_Y),
        signal.channel(CH_Z),
    );
    let mut vecs = Vec::with_capacity(t_frames);
    let mut coherence = Vec::with_capacity(t_frames);
    for t in 0..t_frames {
        let s = frame.start(t);
        let mut acc = [0.0f64; 3];
        let mut magnitude = 0.0;
        for (i, &wi) in w2.iter().enumerate() {
            let p = wi * w[s + i];
            let v = [p * x[s + i], p * y[s + i], p * z[s + i]];
            acc = vec3::add(acc, v);
            magnitude += wi * w[s + i].abs() * vec3::norm([x[s + i], y[s + i], z[s + i]]);
        }
        coherence.push(if magnitude > 0.0 { vec3::norm(acc) / magnitude } else { 0.0 });
        vecs.push(acc);
    }
    Some(FrameIntensity { vecs, coherence })
}

/// Classical DOA trajectory from the pseudo-intensity vectors of an FOA
/// signal. Per frame the broadband intensity vector is normalized to a
/// direction; frames whose envelope is below [`ENV_CONFIDENCE`] — and, when
/// any single-source-like frames exist, frames failing the coherence gate —
/// inherit the nearest confident frame. Directions are then smoothed by a
/// moving average and the per-sample trajectory interpolates linearly
/// between frame anchors.
pub fn pseudo_intensity_track(
    signal: &FoaSignal,
    env: &SampleEnvelope,
    frame: FrameConfig,
    smoothing: usize,
) -> Result<Trajectory, EstimatorError> {
    let n = signal.len();
    let raw = frame_intensity_vectors(signal, frame)
        .ok_or(EstimatorError::SignalTooShort { n, win: frame.win })?;
    let t_frames = raw.vecs.len();

    // Frame-level envelope confidence: mean of the sample envelope per frame.
    let frame_env: Vec<f64> = (0..t_frames)
        .map(|t| {
            let s = frame.start(t);
            let hi = (s + frame.win).min(env.len());
            if s >= hi {
                0.0
            } else {
                env.values[s..hi].iter().sum::<f64>() / (hi - s) as f64
            }
        })
        .collect();

    let audible: Vec<bool> = frame_env.iter().map(|&e| e >= ENV_CONFIDENCE).collect();
    if !audible.iter().any(|&a| a) {
        return Err(EstimatorError::SilentInput);
    }
    // Target-dominated frames: the conditioning envelope accounts for most
    // of the tracked signal's own level there.
    let signal_env = extract_envelope(signal.omni(), frame)?;
    let dominant: Vec<bool> = (0..t_frames)
        .map(|t| frame_env[t] >= DOMINANCE_GATE * signal_env.values[t])
        .collect();
    let coherent: Vec<bool> = (0..t_frames).map(|t| raw.coherence[t] >= COHERENCE_GATE).collect();

    // Strictest tier with any usable frames wins: audible+dominant+coherent,
    // then audible+dominant, then audible alone.
    let usable = |t: usize| vec3::normalize(raw.vecs[t]).is_some();
    let tiers: [&dyn Fn(usize) -> bool; 3] = [
        &|t| audible[t] && dominant[t] && coherent[t],
        &|t| audible[t] && dominant[t],
        &|t| audible[t],
    ];
    let confident: Vec<usize> = tiers
        .iter()
        .map(|keep| (0..t_frames).filter(|&t| keep(t) && usable(t)).collect::<Vec<_>>())
        .find(|set| !set.is_empty())
        .ok_or(EstimatorError::SilentInput)?;

    let mut dirs: Vec<Vec3> = Vec::with_capacity(t_frames);
    let mut next_confident = 0usize;
    for t in 0..t_frames {
        // Nearest confident frame (confident is sorted).
        while next_confident + 1 < confident.len()
            && confident[next_confident + 1].abs_diff(t) <= confident[next_confident].abs_diff(t)
        {
            next_confident += 1;
        }
        let source = confident[next_confident];
        let v = if confident.binary_search(&t).is_ok() { raw.vecs[t] } else { raw.vecs[source] };
        dirs.push(vec3::normalize(v).expect("confident frames have nonzero intensity"));
    }

    // Centered moving average over `smoothing` frames, then renormalize.
    let half = smoothing / 2;
    let frame_dirs: Vec<Vec3> = (0..t_frames)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(t_frames);
            let mut acc = [0.0; 3];
            for v in &dirs[lo..hi] {
                acc = vec3::add(acc, *v);
            }
            vec3::normalize(acc).unwrap_or(dirs[t])
        })
        .collect();

    // Linear interpolation between frame anchors, then renormalize.
    let mut out = Vec::with_capacity(n);
    let first_anchor = frame.anchor(0);
    let last_anchor = frame.anchor(t_frames - 1);
    let mut prev = frame_dirs[0];
    for i in 0..n {
        let v = if i <= first_anchor {
            frame_dirs[0]
        } else if i >= last_anchor {
            frame_dirs[t_frames - 1]
        } else {
            let t = (i - frame.win / 2) / frame.hop;
            let (a0, a1) = (frame.anchor(t), frame.anchor(t + 1));
            let alpha = (i - a0) as f64 / (a1 - a0) as f64;
            vec3::add(
                vec3::scale(frame_dirs[t], 1.0 - alpha),
                vec3::scale(frame_dirs[t + 1], alpha),
            )
        };
        let dir = vec3::normalize(v).unwrap_or(prev);
        out.push(dir);
        prev = dir;
    }
    Ok(Trajectory::from_dirs(out)?)
}

/// [`Tracker`] backed by [`pseudo_intensity_track`]; when a separated signal
/// is available it is tracked instead of the mixture.
#[derive(Debug, Clone)]
pub struct PseudoIntensityTracker {
    pub frame: FrameConfig,
    /// Moving-average width in frames.
    pub smoothing: usize,
}

impl Default for PseudoIntensityTracker {
    fn default() -> Self {
        Self { frame: FrameConfig::default(), smoothing: 5 }
    }
}

impl Tracker for PseudoIntensityTracker {
    fn name(&self) -> &str {
        "pseudo-intensity"
    }

    fn track(
        &self,
        mixture: &FoaSignal,
        env: &SampleEnvelope,
        separated: Option<&FoaSignal>,
    ) -> Result<Trajectory, EstimatorError> {
        let signal = separated.unwrap_or(mixture);
        pseudo_intensity_track(signal, env, self.frame, self.smoothing)
    }
}

/// Extraction result; `passthrough_frames` lists frames whose steering
/// direction had zero norm and fell back to the omni channel.
#[derive(Debug, Clone)]
pub struct SteeredExtract {
    pub signal: FoaSignal,
    pub passthrough_frames: Vec<usize>,
}

/// Steered first-order extraction: per frame a cardioid pointed along the
/// fit direction combines the FOA channels into a mono estimate, the frame
/// gain pulls the estimate toward the fit's intensity magnitude, and the
/// result is re-encoded to FOA at the steering direction. Overlapping Hann
/// windows crossfade the per-frame gains.
pub fn steered_extract(
    mixture: &FoaSignal,
    fit: &FramedIntensityTrajectory,
) -> Result<SteeredExtract, EstimatorError> {
    let n = mixture.len();
    let frame = FrameConfig::new(fit.win, fit.hop);
    let t_implied = frame
        .frame_count(n)
        .ok_or(EstimatorError::SignalTooShort { n, win: fit.win })?;
    if t_implied != fit.frames() {
        return Err(EstimatorError::FrameGridMismatch { fit: fit.frames(), signal: t_implied });
    }

    let window = hann(fit.win);
    let mut num: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut den = vec![0.0f64; n];
    let mut passthrough = Vec::new();

    // Frame starts; a clamped extra frame reusing the last fit row covers any
    // tail samples the regular grid misses.
    let mut jobs: Vec<(usize, usize)> = (0..fit.frames()).map(|t| (t, frame.start(t))).collect();
    let last_covered = frame.start(fit.frames() - 1) + fit.win;
    if last_covered < n {
        jobs.push((fit.frames() - 1, n - fit.win));
    }

    for &(t, start) in &jobs {
        let v = fit.vecs[t];
        let target = vec3::norm(v);
        let dir = vec3::normalize(v);
        if dir.is_none() && start == frame.start(t) {
            passthrough.push(t);
        }

        // Cardioid combination, or plain omni when the direction is unusable.
        let mut beam = vec![0.0f64; fit.win];
        match dir {
            Some(d) => {
                let (w, x, y, z) = (
                    mixture.channel(CH_W),
                    mixture.channel(CH_X),
                    mixture.channel(CH_Y),
                    mixture.channel(CH_Z),
                );
                for i in 0..fit.win {
                    let s = start + i;
                    beam[i] = 0.5 * (w[s] + d[0] * x[s] + d[1] * y[s] + d[2] * z[s]);
                }
            }
            None => beam.copy_from_slice(&mixture.channel(CH_W)[start..start + fit.win]),
        }

        // Pull the frame toward the intensity magnitude; silence when the
        // target amplitude is zero.
        let measured = beam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gain = if target <= 0.0 {
            0.0
        } else {
            target / measured.max(0.5 * target)
        };

        let enc = match dir {
            Some(d) => crate::acoustics::encode_gains(d),
            None => [1.0, 0.0, 0.0, 0.0],
        };
        for i in 0..fit.win {
            let s = start + i;
            let contribution = window[i] * gain * beam[i];
            for c in 0..4 {
                num[c][s] += enc[c] * contribution;
            }
            den[s] += window[i];
        }
    }

    for c in 0..4 {
        for i in 0..n {
            if den[i] > 0.0 {
                num[c][i] /= den[i];
            }
        }
    }
    Ok(SteeredExtract {
        signal: FoaSignal::new(num, mixture.sample_rate),
        passthrough_frames: passthrough,
    })
}

/// [`Extractor`] backed by [`steered_extract`].
#[derive(Debug, Clone, Default)]
pub struct SteeredExtractor;

impl Extractor for SteeredExtractor {
    fn name(&self) -> &str {
        "steered-cardioid"
    }

    fn extract(
        &self,
        mixture: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<FoaSignal, EstimatorError> {
        Ok(steered_extract(mixture, fit)?.signal)
    }
}

/// Classical refinement: steer the separated FOA signal (the cleanest
/// evidence available) along the refined trajectory and return the
/// zeroth-order channel.
#[derive(Debug, Clone, Default)]
pub struct SteeredRefiner;

impl RefinementExtractor for SteeredRefiner {
    fn name(&self) -> &str {
        "steered-refiner"
    }

    fn refine(
        &self,
        _mixture: &FoaSignal,
        separated: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<Vec<f64>, EstimatorError> {
        Ok(steered_extract(separated, fit)?.signal.omni().to_vec())
    }
}

/// Classical envelope splitter: cluster per-frame intensity directions into
/// `c_max` groups (deterministic multi-restart spherical k-means seeded on
/// single-source-like frames) and distribute the mixture envelope over the
/// clusters by direction affinity. Channels whose cluster attracts no frames
/// come out all zero.
#[derive(Debug, Clone)]
pub struct ClusteredEnvelopeEstimator {
    pub iterations: usize,
    /// Frames below this fraction of the mixture's peak envelope do not vote.
    pub activity_threshold: f64,
}

impl Default for ClusteredEnvelopeEstimator {
    fn default() -> Self {
        Self { iterations: 30, activity_threshold: 0.05 }
    }
}

struct Vote {
    frame: usize,
    dir: Vec3,
    weight: f64,
    coherent: bool,
}

impl ClusteredEnvelopeEstimator {
    /// Farthest-point init from `start`, then weighted spherical k-means over
    /// the seed votes.
    fn kmeans(&self, votes: &[Vote], seeds: &[usize], start: usize, c_max: usize) -> Vec<Vec3> {
        let mut centroids = vec![votes[start].dir];
        while centroids.len() < c_max {
            let (best, sep) = seeds
                .iter()
                .copied()
                .map(|i| {
                    let nearest = centroids
                        .iter()
                        .map(|c| vec3::dot(*c, votes[i].dir))
                        .fold(f64::NEG_INFINITY, f64::max);
                    (i, nearest)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if sep > 1.0 - 1e-9 {
                break;
            }
            centroids.push(votes[best].dir);
        }
        for _ in 0..self.iterations {
            let mut sums = vec![[0.0f64; 3]; centroids.len()];
            for &i in seeds {
                let v = &votes[i];
                let m = centroids
                    .iter()
                    .enumerate()
                    .max_by(|a, b| vec3::dot(*a.1, v.dir).total_cmp(&vec3::dot(*b.1, v.dir)))
                    .map(|(c, _)| c)
                    .unwrap();
                sums[m] = vec3::add(sums[m], vec3::scale(v.dir, v.weight));
            }
            let mut moved = false;
            for (c, sum) in sums.iter().enumerate() {
                if let Some(dir) = vec3::normalize(*sum) {
                    if vec3::dot(dir, centroids[c]) < 1.0 - 1e-12 {
                        moved = true;
                    }
                    centroids[c] = dir;
                }
            }
            if !moved {
                break;
            }
        }
        centroids
    }
}

/// Repeatedly merges the closest centroid pair while it is within
/// `max_angle_rad`; duplicated centroids would otherwise split one source's
/// envelope across channels and confuse the count rule.
fn merge_close_centroids(centroids: &mut Vec<Vec3>, _votes: &[Vote], max_angle_rad: f64) {
    let threshold = max_angle_rad.cos();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..centroids.len() {
            for j in i + 1..centroids.len() {
                let d = vec3::dot(centroids[i], centroids[j]);
                if best.is_none_or(|(_, _, b)| d > b) {
                    best = Some((i, j, d));
                }
            }
        }
        match best {
            Some((i, j, d)) if d >= threshold => {
                let merged = vec3::normalize(vec3::add(centroids[i], centroids[j]))
                    .unwrap_or(centroids[i]);
                centroids[i] = merged;
                centroids.remove(j);
            }
            _ => break,
        }
    }
}

impl EnvelopeEstimator for ClusteredEnvelopeEstimator {
    fn name(&self) -> &str {
        "clustered-intensity"
    }

    fn estimate(
        &self,
        mixture: &FoaSignal,
        c_max: usize,
        frame: FrameConfig,
    ) -> Result<Vec<FrameEnvelope>, EstimatorError> {
        let mix_env = extract_envelope(mixture.omni(), frame)?;
        let intensity = frame_intensity_vectors(mixture, frame)
            .ok_or(EstimatorError::SignalTooShort { n: mixture.len(), win: frame.win })?;
        let t_frames = intensity.vecs.len();
        let peak = mix_env.peak();
        if peak <= 0.0 {
            return Err(EstimatorError::SilentInput);
        }

        let mut votes: Vec<Vote> = (0..t_frames)
            .filter_map(|t| {
                if mix_env.values[t] < self.activity_threshold * peak {
                    return None;
                }
                let dir = vec3::normalize(intensity.vecs[t])?;
                Some(Vote {
                    frame: t,
                    dir,
                    weight: vec3::norm(intensity.vecs[t]),
                    coherent: intensity.coherence[t] >= COHERENCE_GATE,
                })
            })
            .collect();
        if votes.is_empty() {
            return Err(EstimatorError::SilentInput);
        }
        // Centroids come from single-source-like frames when enough exist;
        // overlapped frames would drag them between the true directions.
        if votes.iter().filter(|v| v.coherent).count() < c_max.max(4) {
            for v in &mut votes {
                v.coherent = true;
            }
        }

        // Deterministic multi-restart spherical k-means over the coherent
        // votes; the best run by weighted within-cluster dispersion wins.
        let seeds: Vec<usize> = (0..votes.len()).filter(|&i| votes[i].coherent).collect();
        let mut starts: Vec<usize> = seeds.clone();
        starts.sort_by(|&a, &b| votes[b].weight.total_cmp(&votes[a].weight));
        starts.truncate(8);
        let mut best: Option<(f64, Vec<Vec3>)> = None;
        for &start in &starts {
            let centroids = self.kmeans(&votes, &seeds, start, c_max);
            let score: f64 = seeds
                .iter()
                .map(|&i| {
                    let nearest = centroids
                        .iter()
                        .map(|c| vec3::dot(*c, votes[i].dir))
                        .fold(f64::NEG_INFINITY, f64::max);
                    votes[i].weight * (1.0 - nearest)
                })
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, centroids));
            }
        }
        let mut centroids = best.expect("at least one start").1;

        // Centroids closer than the merge angle describe one source; merging
        // them keeps inactive channels empty so the count rule can see them.
        merge_close_centroids(&mut centroids, &votes, 25.0f64.to_radians());

        // Soft gating: active frames distribute the mixture envelope over the
        // clusters in proportion to direction affinity. Hard zeroing of
        // shared frames would delete target content irrecoverably.
        let mut out: Vec<FrameEnvelope> = (0..c_max)
            .map(|_| FrameEnvelope { values: vec![0.0; t_frames], win: frame.win, hop: frame.hop })
            .collect();
        for v in &votes {
            let affinity: Vec<f64> =
                centroids.iter().map(|c| vec3::dot(*c, v.dir).max(0.0)).collect();
            let total: f64 = affinity.iter().sum();
            if total > 0.0 {
                for (c, a) in affinity.iter().enumerate() {
                    out[c].values[v.frame] = mix_env.values[v.frame] * a / total;
                }
            } else {
                let nearest = centroids
                    .iter()
                    .enumerate()
                    .max_by(|a, b| vec3::dot(*a.1, v.dir).total_cmp(&vec3::dot(*b.1, v.dir)))
                    .map(|(i, _)| i)
                    .unwrap();
                out[nearest].values[v.frame] = mix_env.values[v.frame];
            }
        }
        Ok(out)
    }
}
