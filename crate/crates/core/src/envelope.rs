//! Source envelopes: frame-wise peak extraction, sample-rate interpolation,
//! the normalized and inactive-channel envelope losses, and the threshold
//! rule for estimating the number of active sources.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db;
use crate::frame::FrameConfig;

/// Loss weight for the mixture-energy term on inactive channels.
pub const DEFAULT_INACTIVE_TAU: f64 = 0.01;
/// Peak threshold below which an estimated envelope channel counts as
/// inactive. Envelopes must be normalized so the mixture channel-0 peak is 1
/// before applying it (see the pipeline).
pub const DEFAULT_COUNT_THRESHOLD: f64 = 0.25;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("signal of {n} samples is shorter than one window of {win}")]
    SignalTooShort { n: usize, win: usize },
    #[error("need at least 2 frames to interpolate, got {0}")]
    TooFewFrames(usize),
    #[error("envelope shapes do not match: {0} vs {1} frames")]
    ShapeMismatch(usize, usize),
    #[error("estimate/target channel counts do not match: {0} vs {1}")]
    ChannelCountMismatch(usize, usize),
    #[error("target envelope {channel} has zero energy; use the inactive loss")]
    ZeroEnergyTarget { channel: usize },
    #[error("{targets} targets exceed the {c_max} estimated channels")]
    TooManyTargets { targets: usize, c_max: usize },
}

/// Frame-rate nonnegative amplitude sequence (frame-wise peaks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEnvelope {
    pub values: Vec<f64>,
    pub win: usize,
    pub hop: usize,
}

impl FrameEnvelope {
    pub fn frames(&self) -> usize {
        self.values.len()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Sample-rate nonnegative amplitude sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEnvelope {
    pub values: Vec<f64>,
    pub sample_rate: u32,
}

impl SampleEnvelope {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Frame-wise peak of `|x|`: frame `t` is the maximum of the absolute value
/// over samples `[t·hop, t·hop + win)`.
pub fn extract_envelope(mono: &[f64], frame: FrameConfig) -> Result<FrameEnvelope, EnvelopeError> {
    let t_frames = frame
        .frame_count(mono.len())
        .ok_or(EnvelopeError::SignalTooShort { n: mono.len(), win: frame.win })?;
    let values = (0..t_frames)
        .map(|t| {
            let start = frame.start(t);
            mono[start..start + frame.win]
                .iter()
                .fold(0.0f64, |m, &v| m.max(v.abs()))
        })
        .collect();
    Ok(FrameEnvelope { values, win: frame.win, hop: frame.hop })
}

/// Piecewise-linear interpolation through the frame anchors (window centers),
/// constant beyond the first and last anchor.
pub fn interpolate_to_samples(
    env: &FrameEnvelope,
    n_samples: usize,
    sample_rate: u32,
) -> Result<SampleEnvelope, EnvelopeError> {
    let t_frames = env.frames();
    if t_frames < 2 {
        return Err(EnvelopeError::TooFewFrames(t_frames));
    }
    let frame = FrameConfig::new(env.win, env.hop);
    let first_anchor = frame.anchor(0);
    let last_anchor = frame.anchor(t_frames - 1);
    let mut values = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let v = if n <= first_anchor {
            env.values[0]
        } else if n >= last_anchor {
            env.values[t_frames - 1]
        } else {
            let t = (n - frame.win / 2) / frame.hop;
            let a0 = frame.anchor(t);
            let a1 = frame.anchor(t + 1);
            let alpha = (n - a0) as f64 / (a1 - a0) as f64;
            env.values[t] * (1.0 - alpha) + env.values[t + 1] * alpha
        };
        values.push(v);
    }
    Ok(SampleEnvelope { values, sample_rate })
}

fn channel_nmse_db(est: &FrameEnvelope, trg: &FrameEnvelope) -> Result<f64, EnvelopeError> {
    if est.frames() != trg.frames() {
        return Err(EnvelopeError::ShapeMismatch(est.frames(), trg.frames()));
    }
    let num: f64 = est
        .values
        .iter()
        .zip(&trg.values)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(db::ratio_db(num, trg.energy()))
}

/// Mean over channels of `10·log10(Σ(est-trg)² / Σtrg²)`, each channel capped
/// at ±100 dB. Every target channel must have nonzero energy.
pub fn nmse_loss(est: &[FrameEnvelope], trg: &[FrameEnvelope]) -> Result<f64, EnvelopeError> {
    if est.len() != trg.len() {
        return Err(EnvelopeError::ChannelCountMismatch(est.len(), trg.len()));
    }
    if est.is_empty() {
        return Err(EnvelopeError::ChannelCountMismatch(0, 0));
    }
    let mut total = 0.0;
    for (c, (e, t)) in est.iter().zip(trg).enumerate() {
        if t.energy() <= 0.0 {
            return Err(EnvelopeError::ZeroEnergyTarget { channel: c });
        }
        total += channel_nmse_db(e, t)?;
    }
    Ok(total / est.len() as f64)
}

/// Loss for a channel whose target is all-zero:
/// `10·log10(Σest² + τ·Σmix_env²)`, capped at ±100 dB.
pub fn inactive_env_loss(
    est: &FrameEnvelope,
    mix_env: &FrameEnvelope,
    tau: f64,
) -> Result<f64, EnvelopeError> {
    if est.frames() != mix_env.frames() {
        return Err(EnvelopeError::ShapeMismatch(est.frames(), mix_env.frames()));
    }
    Ok(db::power_db(est.energy() + tau * mix_env.energy()))
}

/// Per-channel case loss of the padded envelope set: NMSE against an active
/// target, the inactive loss against a zero pad.
fn slot_loss(
    est: &FrameEnvelope,
    slot: usize,
    trg_active: &[FrameEnvelope],
    mix_env: &FrameEnvelope,
    tau: f64,
) -> Result<f64, EnvelopeError> {
    if slot < trg_active.len() {
        channel_nmse_db(est, &trg_active[slot])
    } else {
        inactive_env_loss(est, mix_env, tau)
    }
}

/// Pads the `C` active targets with `C_max - C` all-zero envelopes, scores
/// each estimated channel with the case loss of its assigned slot and
/// minimizes the mean over all permutations. Returns the minimizing
/// permutation `perm` with `perm[c]` = target slot of estimated channel `c`
/// (slots `0..C` are the active targets in order, slots `C..C_max` the zero
/// pads). Ties break to the lexicographically smallest permutation.
pub fn envelope_set_loss(
    est: &[FrameEnvelope],
    trg_active: &[FrameEnvelope],
    mix_env: &FrameEnvelope,
    tau: f64,
) -> Result<(f64, Vec<usize>), EnvelopeError> {
    let c_max = est.len();
    if trg_active.len() > c_max {
        return Err(EnvelopeError::TooManyTargets { targets: trg_active.len(), c_max });
    }
    for (c, t) in trg_active.iter().enumerate() {
        if t.energy() <= 0.0 {
            return Err(EnvelopeError::ZeroEnergyTarget { channel: c });
        }
    }
    // Precompute the full cost table, then search permutations exhaustively.
    let mut cost = vec![vec![0.0f64; c_max]; c_max];
    for (c, e) in est.iter().enumerate() {
        for slot in 0..c_max {
            cost[c][slot] = slot_loss(e, slot, trg_active, mix_env, tau)?;
        }
    }
    let (perm, total) = crate::metrics::min_cost_permutation(&cost);
    Ok((total / c_max as f64, perm))
}

/// Threshold rule for the number of active sources: a channel is active iff
/// its peak is `>= threshold`. Returns the count and the per-channel mask.
pub fn estimate_source_count(est: &[FrameEnvelope], threshold: f64) -> (usize, Vec<bool>) {
    let mask: Vec<bool> = est.iter().map(|e| e.peak() >= threshold).collect();
    let count = mask.iter().filter(|&&m| m).count();
    (count, mask)
}
