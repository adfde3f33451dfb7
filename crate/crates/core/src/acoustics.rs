//! Image-source rendering of moving sources to first-order ambisonics.
//!
//! Channel order is ACN (W, Y, Z, X) with SN3D normalization and W gain 1,
//! so the first-order gains for a unit direction `u` are simply
//! `[1, u_y, u_z, u_x]`. Distances attenuate as `1/r` (no 4π factor) with
//! speed of sound 343 m/s; free-field oracles in the tests assume exactly
//! these conventions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::scene::{RoomSpec, SceneSpec};
use crate::vec3::{self, Vec3};

pub const SPEED_OF_SOUND_M_S: f64 = 343.0;

/// FOA channel indices (ACN order).
pub const CH_W: usize = 0;
pub const CH_Y: usize = 1;
pub const CH_Z: usize = 2;
pub const CH_X: usize = 3;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("source coincides with the array center")]
    ZeroDistance,
    #[error("source position outside the room")]
    SourceOutsideRoom,
    #[error("t60 must be positive, got {0}")]
    NonPositiveT60(f64),
    #[error("trajectory length {traj} does not match signal length {signal}")]
    LengthMismatch { traj: usize, signal: usize },
    #[error("trajectory leaves the room at sample {sample}")]
    TrajectoryOutsideRoom { sample: usize },
    #[error("cannot mix an empty source list")]
    EmptySourceList,
    #[error("sources disagree in length or sample rate")]
    InconsistentSources,
    #[error("channel-0 signal power is zero; cannot calibrate noise SNR")]
    ZeroSignalPower,
    #[error("scene/source mismatch: {0}")]
    BadScene(String),
}

/// First-order spherical-harmonic gains for a unit direction.
pub fn encode_gains(dir: Vec3) -> [f64; 4] {
    [1.0, dir[1], dir[2], dir[0]]
}

/// Four-channel FOA sample block, channel-planar. Channel 0 is the
/// omnidirectional (zeroth-order) reference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FoaSignal {
    channels: [Vec<f64>; 4],
    pub sample_rate: u32,
}

impl FoaSignal {
    pub fn new(channels: [Vec<f64>; 4], sample_rate: u32) -> Self {
        debug_assert!(channels.iter().all(|c| c.len() == channels[0].len()));
        Self { channels, sample_rate }
    }

    pub fn zeros(n: usize, sample_rate: u32) -> Self {
        Self { channels: std::array::from_fn(|_| vec![0.0; n]), sample_rate }
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    /// The omnidirectional reference channel.
    pub fn omni(&self) -> &[f64] {
        &self.channels[CH_W]
    }

    pub fn channels(&self) -> &[Vec<f64>; 4] {
        &self.channels
    }
}

/// Impulse response from one source position to the four FOA channels.
#[derive(Debug, Clone)]
pub struct FoaRir {
    pub taps: [Vec<f64>; 4],
    pub sample_rate: u32,
}

impl FoaRir {
    pub fn len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().flatten().map(|t| t * t).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RirConfig {
    pub sample_rate: u32,
    /// Maximum total reflection order; `None` covers `tail_factor·t60`.
    pub max_order: Option<u32>,
    /// Tail length as a multiple of T60 when `max_order` is `None`.
    pub tail_factor: f64,
    /// Hard cap on the tail length in seconds.
    pub max_tail_s: Option<f64>,
}

impl Default for RirConfig {
    fn default() -> Self {
        Self { sample_rate: 16_000, max_order: None, tail_factor: 1.5, max_tail_s: None }
    }
}

impl RirConfig {
    pub fn anechoic(sample_rate: u32) -> Self {
        Self { sample_rate, max_order: Some(0), ..Default::default() }
    }
}

/// Block grid for time-varying convolution: the RIR is refreshed at each
/// block center and blocks are crossfaded by windowed overlap-add.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockConfig {
    pub len: usize,
    pub hop: usize,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self { len: 512, hop: 256 }
    }
}

/// Uniform Sabine absorption for a T60 target, clamped to 1 when the room is
/// too small to decay that slowly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceAbsorption {
    pub alpha: f64,
    pub clamped: bool,
}

pub fn sabine_absorption(room: &RoomSpec) -> Result<SurfaceAbsorption, AcousticsError> {
    if room.t60.is_nan() || room.t60 <= 0.0 {
        return Err(AcousticsError::NonPositiveT60(room.t60));
    }
    let alpha = 0.161 * room.volume() / (room.t60 * room.surface_area());
    if alpha > 1.0 {
        Ok(SurfaceAbsorption { alpha: 1.0, clamped: true })
    } else {
        Ok(SurfaceAbsorption { alpha, clamped: false })
    }
}

/// Image-source FOA RIR. Every image of total reflection order `k`
/// contributes amplitude `(1-α)^k / r` at fractional delay `r·fs/c`
/// (linearly interpolated over two taps), encoded with the first-order
/// gains of its direction seen from the array center.
pub fn compute_foa_rir(
    room: &RoomSpec,
    src: Vec3,
    cfg: &RirConfig,
) -> Result<FoaRir, AcousticsError> {
    if !room.contains(src, 0.0) {
        return Err(AcousticsError::SourceOutsideRoom);
    }
    let r_direct = vec3::distance(src, room.array_center);
    if r_direct < 1e-9 {
        return Err(AcousticsError::ZeroDistance);
    }
    let fs = cfg.sample_rate as f64;
    let beta = 1.0 - sabine_absorption(room)?.alpha;

    // Length budget in samples; for unlimited order it bounds the image set.
    let tail_s = match cfg.max_order {
        Some(_) => 0.0,
        None => {
            let t = cfg.tail_factor * room.t60;
            cfg.max_tail_s.map_or(t, |cap| t.min(cap))
        }
    };
    let len_budget = match cfg.max_order {
        Some(order) => {
            // Farthest image of that order lies within order+1 room diagonals.
            let diag = vec3::norm(room.dims);
            ((r_direct + (order as f64 + 1.0) * diag) / SPEED_OF_SOUND_M_S * fs).ceil() as usize + 2
        }
        None => ((r_direct / SPEED_OF_SOUND_M_S + tail_s) * fs).ceil() as usize + 2,
    };

    // Shell counts per axis so that every image within the budget is visited.
    let max_dist_m = len_budget as f64 / fs * SPEED_OF_SOUND_M_S;
    let shells = |dim: f64| -> i64 {
        match cfg.max_order {
            Some(order) => (order as i64 + 2) / 2,
            None => (max_dist_m / (2.0 * dim)).ceil() as i64 + 1,
        }
    };
    let (n1, n2, n3) = (shells(room.dims[0]), shells(room.dims[1]), shells(room.dims[2]));

    let mut taps: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; len_budget]);
    let mut max_used = 0usize;
    for mx in -n1..=n1 {
        for my in -n2..=n2 {
            for mz in -n3..=n3 {
                for q in 0..2i64 {
                    for j in 0..2i64 {
                        for k in 0..2i64 {
                            let order = ((mx - q).abs()
                                + mx.abs()
                                + (my - j).abs()
                                + my.abs()
                                + (mz - k).abs()
                                + mz.abs()) as u32;
                            if let Some(max_order) = cfg.max_order {
                                if order > max_order {
                                    continue;
                                }
                            }
                            let img = [
                                (1 - 2 * q) as f64 * src[0] + 2.0 * mx as f64 * room.dims[0],
                                (1 - 2 * j) as f64 * src[1] + 2.0 * my as f64 * room.dims[1],
                                (1 - 2 * k) as f64 * src[2] + 2.0 * mz as f64 * room.dims[2],
                            ];
                            let rel = vec3::sub(img, room.array_center);
                            let r = vec3::norm(rel);
                            if r < 1e-9 {
                                continue;
                            }
                            let delay = r / SPEED_OF_SOUND_M_S * fs;
                            let i0 = delay.floor() as usize;
                            if i0 + 1 >= len_budget {
                                continue;
                            }
                            let frac = delay - i0 as f64;
                            let gain = beta.powi(order as i32) / r;
                            let g = encode_gains(vec3::scale(rel, 1.0 / r));
                            for (c, tap) in taps.iter_mut().enumerate() {
                                tap[i0] += gain * g[c] * (1.0 - frac);
                                tap[i0 + 1] += gain * g[c] * frac;
                            }
                            max_used = max_used.max(i0 + 1);
                        }
                    }
                }
            }
        }
    }
    for tap in &mut taps {
        tap.truncate(max_used + 1);
    }
    Ok(FoaRir { taps, sample_rate: cfg.sample_rate })
}

/// Full convolution of a mono block with an FOA RIR, accumulated into `out`
/// starting at `offset` (entries past `out` are dropped).
fn accumulate_convolution(out: &mut FoaSignal, offset: usize, block: &[f64], rir: &FoaRir) {
    let n_out = out.len();
    for c in 0..4 {
        let taps = &rir.taps[c];
        let dst = out.channel_mut(c);
        for (i, &x) in block.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let base = offset + i;
            if base >= n_out {
                break;
            }
            let m = taps.len().min(n_out - base);
            let dst = &mut dst[base..base + m];
            for (d, &t) in dst.iter_mut().zip(&taps[..m]) {
                *d += x * t;
            }
        }
    }
}

/// Triangular crossfade window, strictly positive so the per-sample window
/// sums stay invertible on the block grid.
fn crossfade_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| ((i + 1).min(len - i)) as f64 / (len as f64 / 2.0))
        .collect()
}

/// Block start offsets covering `n` samples, each block `len` long.
fn block_starts(n: usize, len: usize, hop: usize) -> Vec<usize> {
    if n <= len {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..=(n - len)).step_by(hop).collect();
    if starts.last().copied() != Some(n - len) {
        starts.push(n - len);
    }
    starts
}

/// Renders one moving source to FOA. The input is split into overlapping
/// blocks whose windows form an exact partition of unity; each block is
/// convolved with the RIR at the block-center source position and the
/// results are overlap-added, so a static trajectory reduces to a single
/// time-invariant convolution.
pub fn render_moving_source(
    signal: &[f64],
    positions: &[Vec3],
    room: &RoomSpec,
    rir_cfg: &RirConfig,
    block: &BlockConfig,
) -> Result<FoaSignal, AcousticsError> {
    if signal.len() != positions.len() {
        return Err(AcousticsError::LengthMismatch {
            traj: positions.len(),
            signal: signal.len(),
        });
    }
    if let Some(sample) = (0..positions.len()).find(|&n| !room.contains(positions[n], 0.0)) {
        return Err(AcousticsError::TrajectoryOutsideRoom { sample });
    }
    let n = signal.len();
    let mut out = FoaSignal::zeros(n, rir_cfg.sample_rate);
    if n == 0 {
        return Ok(out);
    }

    let block_len = block.len.min(n);
    let starts = block_starts(n, block_len, block.hop.max(1));
    let window = crossfade_window(block_len);

    let mut wsum = vec![0.0f64; n];
    for &s in &starts {
        for (i, w) in window.iter().enumerate() {
            wsum[s + i] += w;
        }
    }

    let mut windowed = vec![0.0f64; block_len];
    for &s in &starts {
        let center = (s + block_len / 2).min(n - 1);
        let rir = compute_foa_rir(room, positions[center], rir_cfg)?;
        for i in 0..block_len {
            windowed[i] = signal[s + i] * window[i] / wsum[s + i];
        }
        accumulate_convolution(&mut out, s, &windowed, &rir);
    }
    Ok(out)
}

/// Mixture plus the clean per-source images and the injected noise. The
/// noise field is exactly `mixture - Σ images`, so additivity holds bitwise.
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub mixture: FoaSignal,
    pub images: Vec<FoaSignal>,
    pub noise: FoaSignal,
}

/// Sums per-source images and adds white Gaussian sensor noise scaled so the
/// realized channel-0 SNR equals `noise_snr_db` (`None` disables noise).
pub fn mix_scene(
    images: Vec<FoaSignal>,
    noise_snr_db: Option<f64>,
    seed: u64,
) -> Result<MixOutput, AcousticsError> {
    let first = images.first().ok_or(AcousticsError::EmptySourceList)?;
    let n = first.len();
    let fs = first.sample_rate;
    if images.iter().any(|im| im.len() != n || im.sample_rate != fs) {
        return Err(AcousticsError::InconsistentSources);
    }

    let mut sum = FoaSignal::zeros(n, fs);
    for im in &images {
        for c in 0..4 {
            let dst = sum.channel_mut(c);
            for (d, &s) in dst.iter_mut().zip(im.channel(c)) {
                *d += s;
            }
        }
    }

    let mut mixture = sum.clone();
    if let Some(snr_db) = noise_snr_db {
        let p_sig = mean_power(sum.omni());
        if p_sig <= 0.0 {
            return Err(AcousticsError::ZeroSignalPower);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: [Vec<f64>; 4] = std::array::from_fn(|_| {
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        });
        let p_raw = mean_power(&raw[CH_W]);
        if p_raw > 0.0 {
            let scale = (p_sig * 10f64.powf(-snr_db / 10.0) / p_raw).sqrt();
            for c in 0..4 {
                let dst = mixture.channel_mut(c);
                for (d, &v) in dst.iter_mut().zip(&raw[c]) {
                    *d += scale * v;
                }
            }
        }
    }

    // Recompute the injected noise from the rounded mixture so that
    // mixture - Σ images == noise holds bit-exactly.
    let mut noise = FoaSignal::zeros(n, fs);
    for c in 0..4 {
        let dst = noise.channel_mut(c);
        for i in 0..n {
            dst[i] = mixture.channel(c)[i] - sum.channel(c)[i];
        }
    }
    Ok(MixOutput { mixture, images, noise })
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RenderConfig {
    pub rir: RirConfig,
    pub block: BlockConfig,
    /// When false the scene's noise SNR is ignored and no noise is added.
    pub noise: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { rir: RirConfig::default(), block: BlockConfig::default(), noise: true }
    }
}

/// A fully rendered scene: mixture, clean images, injected noise and the
/// source positions the images were rendered at.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub mixture: FoaSignal,
    pub images: Vec<FoaSignal>,
    pub noise: FoaSignal,
    pub positions: Vec<Vec<Vec3>>,
}

/// Renders every source of a scene and mixes them. `signals[s]` must hold the
/// dry samples for source `s`, matching its trajectory length.
pub fn render_scene(
    spec: &SceneSpec,
    signals: &[Vec<f64>],
    cfg: &RenderConfig,
) -> Result<RenderedScene, AcousticsError> {
    if signals.len() != spec.sources.len() {
        return Err(AcousticsError::BadScene(format!(
            "{} signals supplied for {} sources",
            signals.len(),
            spec.sources.len()
        )));
    }
    let rir_cfg = RirConfig { sample_rate: spec.sample_rate, ..cfg.rir };
    let mut images = Vec::with_capacity(spec.sources.len());
    let mut positions = Vec::with_capacity(spec.sources.len());
    for (s, source) in spec.sources.iter().enumerate() {
        let path = crate::scene::sample_trajectory(&source.trajectory, &spec.room)
            .map_err(|e| AcousticsError::BadScene(format!("source {s}: {e}")))?;
        if signals[s].len() != path.len() {
            return Err(AcousticsError::LengthMismatch {
                traj: path.len(),
                signal: signals[s].len(),
            });
        }
        images.push(render_moving_source(
            &signals[s],
            &path,
            &spec.room,
            &rir_cfg,
            &cfg.block,
        )?);
        positions.push(path);
    }
    let snr = cfg.noise.then_some(spec.noise_snr_db);
    let mix = mix_scene(images, snr, crate::scene::sub_seed(spec.seed, 0x004E_015E))?;
    Ok(RenderedScene {
        mixture: mix.mixture,
        images: mix.images,
        noise: mix.noise,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RoomSpec;

    fn room() -> RoomSpec {
        RoomSpec { dims: [6.0, 5.0, 4.0], t60: 0.5, array_center: [3.0, 2.5, 2.0] }
    }

    #[test]
    fn sabine_matches_hand_computation() {
        // V = 100 m³, S = 130 m² at t60 = 0.5 s.
        let r = RoomSpec { dims: [5.0, 5.0, 4.0], t60: 0.5, array_center: [2.5, 2.5, 2.0] };
        assert!((r.volume() - 100.0).abs() < 1e-12);
        assert!((r.surface_area() - 130.0).abs() < 1e-12);
        let a = sabine_absorption(&r).unwrap();
        assert!((a.alpha - 0.161 * 100.0 / (0.5 * 130.0)).abs() < 1e-12);
        assert!(!a.clamped);
    }

    #[test]
    fn sabine_limit_and_clamp() {
        let mut r = room();
        r.t60 = 1e9;
        assert!(sabine_absorption(&r).unwrap().alpha < 1e-9);
        // Even fully absorbing walls cannot decay a large volume in 0.2 s.
        let big = RoomSpec { dims: [10.0, 10.0, 10.0], t60: 0.2, array_center: [5.0; 3] };
        let a = sabine_absorption(&big).unwrap();
        assert_eq!(a.alpha, 1.0);
        assert!(a.clamped);
        let mut bad = room();
        bad.t60 = 0.0;
        assert!(sabine_absorption(&bad).is_err());
    }

    #[test]
    fn free_field_rir_along_x_axis() {
        let r = room();
        let dist = 1.5;
        let src = [r.array_center[0] + dist, r.array_center[1], r.array_center[2]];
        let cfg = RirConfig::anechoic(16_000);
        let rir = compute_foa_rir(&r, src, &cfg).unwrap();
        let expected_delay = dist / SPEED_OF_SOUND_M_S * 16_000.0;
        let i0 = expected_delay.floor() as usize;
        let w_gain = rir.taps[CH_W][i0] + rir.taps[CH_W][i0 + 1];
        let x_gain = rir.taps[CH_X][i0] + rir.taps[CH_X][i0 + 1];
        assert!((w_gain - 1.0 / dist).abs() < 1e-12);
        assert!((x_gain - 1.0 / dist).abs() < 1e-12);
        assert!(rir.taps[CH_Y].iter().all(|t| t.abs() < 1e-12));
        assert!(rir.taps[CH_Z].iter().all(|t| t.abs() < 1e-12));
        let peak = rir.taps[CH_W].iter().enumerate().max_by(|a, b| {
            a.1.abs().partial_cmp(&b.1.abs()).unwrap()
        });
        assert!((peak.unwrap().0 as f64 - expected_delay).abs() <= 1.0);
    }

    #[test]
    fn zenith_source_loads_z_channel() {
        let r = room();
        let src = [r.array_center[0], r.array_center[1], r.array_center[2] + 1.0];
        let rir = compute_foa_rir(&r, src, &RirConfig::anechoic(16_000)).unwrap();
        let sum = |c: usize| rir.taps[c].iter().sum::<f64>();
        assert!((sum(CH_Z) - sum(CH_W)).abs() < 1e-12);
        assert!(sum(CH_X).abs() < 1e-12 && sum(CH_Y).abs() < 1e-12);
    }

    #[test]
    fn reflections_add_energy() {
        let r = room();
        let src = [2.0, 1.5, 1.8];
        let e0 = compute_foa_rir(&r, src, &RirConfig::anechoic(16_000))
            .unwrap()
            .energy();
        let e2 = compute_foa_rir(
            &r,
            src,
            &RirConfig { sample_rate: 16_000, max_order: Some(2), ..Default::default() },
        )
        .unwrap()
        .energy();
        assert!(e2 >= e0);
        assert!(e2 > e0 * 1.001, "second-order images must contribute");
    }

    #[test]
    fn rir_rejects_degenerate_sources() {
        let r = room();
        assert!(matches!(
            compute_foa_rir(&r, r.array_center, &RirConfig::anechoic(16_000)),
            Err(AcousticsError::ZeroDistance)
        ));
        assert!(matches!(
            compute_foa_rir(&r, [7.0, 1.0, 1.0], &RirConfig::anechoic(16_000)),
            Err(AcousticsError::SourceOutsideRoom)
        ));
    }

    #[test]
    fn static_render_equals_single_convolution() {
        let r = room();
        let fs = 8000;
        let n = 2000;
        let mut rng_state = 0x1234_5678u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let signal: Vec<f64> = (0..n).map(|_| next()).collect();
        let pos = [2.0, 1.5, 1.8];
        let cfg = RirConfig { sample_rate: fs, max_order: Some(2), ..Default::default() };
        let moving = render_moving_source(
            &signal,
            &vec![pos; n],
            &r,
            &cfg,
            &BlockConfig::default(),
        )
        .unwrap();
        let rir = compute_foa_rir(&r, pos, &cfg).unwrap();
        let mut direct = FoaSignal::zeros(n, fs);
        accumulate_convolution(&mut direct, 0, &signal, &rir);
        for c in 0..4 {
            let num: f64 = moving
                .channel(c)
                .iter()
                .zip(direct.channel(c))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let den: f64 = direct.channel(c).iter().map(|v| v * v).sum();
            assert!(num <= 1e-12 * den.max(1e-30), "channel {c}: rel err {}", (num / den).sqrt());
        }
    }

    #[test]
    fn zero_input_renders_to_zero() {
        let r = room();
        let out = render_moving_source(
            &vec![0.0; 1000],
            &vec![[2.0, 2.0, 2.0]; 1000],
            &r,
            &RirConfig { sample_rate: 8000, max_order: Some(1), ..Default::default() },
            &BlockConfig::default(),
        )
        .unwrap();
        assert!(out.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn free_field_static_render_is_delay_and_gain() {
        let r = room();
        let fs = 16_000u32;
        let n = 4000;
        let dist = 2.0;
        let pos = [r.array_center[0] + dist, r.array_center[1], r.array_center[2]];
        let mut signal = vec![0.0; n];
        signal[100] = 1.0;
        signal[500] = -0.5;
        let out = render_moving_source(
            &signal,
            &vec![pos; n],
            &r,
            &RirConfig::anechoic(fs),
            &BlockConfig::default(),
        )
        .unwrap();
        let delay = dist / SPEED_OF_SOUND_M_S * fs as f64;
        let i = 100 + delay.floor() as usize;
        let got = out.omni()[i] + out.omni()[i + 1];
        assert!((got - 1.0 / dist).abs() < 1e-9);
    }

    #[test]
    fn moving_render_rejects_out_of_room_path() {
        let r = room();
        let mut path = vec![[2.0, 2.0, 2.0]; 100];
        path[57] = [9.0, 2.0, 2.0];
        let err = render_moving_source(
            &vec![0.1; 100],
            &path,
            &r,
            &RirConfig::anechoic(8000),
            &BlockConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AcousticsError::TrajectoryOutsideRoom { sample: 57 }));
    }

    #[test]
    fn mixing_is_additive_and_noise_free_case_is_exact() {
        let fs = 8000;
        let mut a = FoaSignal::zeros(100, fs);
        a.channel_mut(0)[3] = 1.0;
        let out = mix_scene(vec![a.clone()], None, 9).unwrap();
        assert_eq!(out.mixture, a);
        assert!(out.noise.channels().iter().flatten().all(|&v| v == 0.0));
        assert!(mix_scene(vec![], None, 0).is_err());
    }

    #[test]
    fn noise_hits_requested_snr_and_additivity_is_bitwise() {
        let fs = 16_000;
        let n = 16_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut img = FoaSignal::zeros(n, fs);
        for c in 0..4 {
            for v in img.channel_mut(c).iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        }
        for &snr in &[20.0, 25.0, 30.0] {
            let out = mix_scene(vec![img.clone()], Some(snr), 77).unwrap();
            for c in 0..4 {
                for i in 0..n {
                    let diff = out.mixture.channel(c)[i] - img.channel(c)[i];
                    assert!(diff.to_bits() == out.noise.channel(c)[i].to_bits());
                }
            }
            let p_sig = mean_power(img.omni());
            let p_noise = mean_power(out.noise.omni());
            let realized = 10.0 * (p_sig / p_noise).log10();
            assert!((realized - snr).abs() < 0.1, "requested {snr}, realized {realized}");
        }
    }

    #[test]
    fn static_render_is_linear_in_the_input() {
        let r = room();
        let n = 1500;
        let signal: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
        let scaled: Vec<f64> = signal.iter().map(|v| 2.5 * v).collect();
        let cfg = RirConfig::anechoic(8000);
        let path = vec![[2.0, 3.0, 2.2]; n];
        let a = render_moving_source(&signal, &path, &r, &cfg, &BlockConfig::default()).unwrap();
        let b = render_moving_source(&scaled, &path, &r, &cfg, &BlockConfig::default()).unwrap();
        for c in 0..4 {
            for i in 0..n {
                assert!((b.channel(c)[i] - 2.5 * a.channel(c)[i]).abs() < 1e-12);
            }
        }
    }
}
