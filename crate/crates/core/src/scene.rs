//! Randomized rooms and moving-source trajectories.
//!
//! A scene is a shoebox room, a reverberation target, one sinusoidally
//! perturbed linear trajectory per source and a sensor-noise SNR. Sampling is
//! a pure function of the seed so datasets are reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::{self, Vec3};

/// Required clearance between any trajectory sample and the room walls.
pub const WALL_MARGIN_M: f64 = 0.1;
/// Required clearance between any trajectory sample and the array center.
pub const MIN_ARRAY_DISTANCE_M: f64 = 0.3;
/// Per-axis cap on the number of sinusoidal oscillation periods.
pub const MAX_OSCILLATION_PERIODS: f64 = 2.0;
/// Attempts of rejection sampling before a scene is declared infeasible.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("trajectory leaves the room at sample {sample} on axis {axis}")]
    PathOutsideRoom { sample: usize, axis: usize },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("no feasible scene geometry after {attempts} attempts (seed {seed})")]
    Infeasible { seed: u64, attempts: usize },
    #[error("invalid sampling ranges: {0}")]
    BadRanges(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room extent in meters along x, y, z; walls at 0 and `dims[a]`.
    pub dims: Vec3,
    /// Reverberation time target in seconds.
    pub t60: f64,
    /// Position of the coincident FOA array.
    pub array_center: Vec3,
}

impl RoomSpec {
    pub fn contains(&self, p: Vec3, margin: f64) -> bool {
        (0..3).all(|a| p[a] >= margin && p[a] <= self.dims[a] - margin)
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }
}

/// Sinusoidally perturbed linear path: position at sample `n` is
/// `p0 + (n/N)(pN - p0) + amp·sin(omega·n)` elementwise per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub p0: Vec3,
    #[serde(rename = "pN")]
    pub p_end: Vec3,
    /// Angular frequency per axis in radians per sample.
    pub omega: Vec3,
    /// Oscillation amplitude per axis in meters.
    pub amp: Vec3,
    /// Number of samples N; `sample_trajectory` emits positions for n = 0..N.
    pub n_samples: usize,
}

impl TrajectorySpec {
    /// Evaluates the path formula at a (possibly fractional) sample index.
    pub fn position_at(&self, n: f64) -> Vec3 {
        let frac = n / self.n_samples as f64;
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = self.p0[a]
                + frac * (self.p_end[a] - self.p0[a])
                + self.amp[a] * (self.omega[a] * n).sin();
        }
        p
    }

    /// Oscillation periods per axis over the full path length.
    pub fn periods(&self) -> Vec3 {
        let n = self.n_samples as f64;
        [
            self.omega[0] * n / std::f64::consts::TAU,
            self.omega[1] * n / std::f64::consts::TAU,
            self.omega[2] * n / std::f64::consts::TAU,
        ]
    }
}

/// Where a source's dry signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceAudio {
    /// Path to a mono WAV file, resolved by the I/O layer.
    File(String),
    /// Seeded synthetic signal generated in-process.
    Synthetic { kind: SignalKind, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Stationary white Gaussian noise.
    WhiteNoise,
    /// White noise gated by random on/off segments with smooth ramps.
    Bursts,
}

impl SourceAudio {
    /// Renders a synthetic reference to samples; `None` for file-backed audio.
    pub fn synthesize(&self, n_samples: usize, sample_rate: u32) -> Option<Vec<f64>> {
        match *self {
            SourceAudio::File(_) => None,
            SourceAudio::Synthetic { kind, seed } => {
                Some(synthesize_signal(kind, seed, n_samples, sample_rate))
            }
        }
    }
}

fn synthesize_signal(kind: SignalKind, seed: u64, n_samples: usize, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n_samples)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    if kind == SignalKind::Bursts {
        let gate = burst_gate(&mut rng, n_samples, sample_rate);
        for (v, g) in x.iter_mut().zip(gate) {
            *v *= g;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let s = 0.9 / peak;
        for v in &mut x {
            *v *= s;
        }
    }
    x
}

/// On/off gate built from random segments of 0.15–0.4 s, active with
/// probability 0.5, with 16 ms raised-cosine ramps. At least one segment is
/// forced active so the source is never fully silent.
fn burst_gate(rng: &mut ChaCha8Rng, n_samples: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let ramp = (0.016 * fs) as usize;
    let mut states: Vec<(usize, bool)> = Vec::new();
    let mut pos = 0usize;
    while pos < n_samples {
        let len = (rng.random_range(0.15..0.4) * fs) as usize;
        let len = len.clamp(1, n_samples - pos);
        states.push((len, rng.random_bool(0.5)));
        pos += len;
    }
    if states.iter().all(|&(_, on)| !on) {
        let pick = rng.random_range(0..states.len());
        states[pick].1 = true;
    }

    let mut gate = Vec::with_capacity(n_samples);
    for &(len, on) in &states {
        let base = if on { 1.0 } else { 0.0 };
        for _ in 0..len {
            gate.push(base);
        }
    }
    // Smooth the hard edges with a short half-cosine ramp.
    if ramp > 1 {
        let raw = gate.clone();
        for n in 0..n_samples {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for k in 0..ramp {
                let i = n as isize - k as isize + (ramp / 2) as isize;
                if i >= 0 && (i as usize) < n_samples {
                    let w = 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / ramp as f64).cos());
                    acc += w * raw[i as usize];
                    wsum += w;
                }
            }
            if wsum > 0.0 {
                gate[n] = acc / wsum;
            }
        }
    }
    gate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub trajectory: TrajectorySpec,
    pub audio: SourceAudio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub sources: Vec<SourceSpec>,
    pub noise_snr_db: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

/// Ranges used by [`sample_scene`]; defaults follow the simulated-dataset
/// setup (rooms 3×3×3 to 10×10×6 m³, T60 0.2–1.0 s, sensor SNR 20–30 dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub dims_xy: (f64, f64),
    pub dims_z: (f64, f64),
    pub t60: (f64, f64),
    pub noise_snr_db: (f64, f64),
    /// Inclusive range for the number of sources.
    pub n_sources: (usize, usize),
    pub duration_s: f64,
    pub sample_rate: u32,
    pub source_kind: SignalKind,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            dims_xy: (3.0, 10.0),
            dims_z: (3.0, 6.0),
            t60: (0.2, 1.0),
            noise_snr_db: (20.0, 30.0),
            n_sources: (2, 2),
            duration_s: 10.0,
            sample_rate: 16_000,
            source_kind: SignalKind::Bursts,
        }
    }
}

impl SamplingRanges {
    fn check(&self) -> Result<(), SceneError> {
        let ordered = |r: (f64, f64)| r.0 <= r.1 && r.0.is_finite() && r.1.is_finite();
        if !ordered(self.dims_xy) || !ordered(self.dims_z) || !ordered(self.t60)
            || !ordered(self.noise_snr_db)
        {
            return Err(SceneError::BadRanges("range bounds out of order".into()));
        }
        if self.n_sources.0 == 0 || self.n_sources.0 > self.n_sources.1 {
            return Err(SceneError::BadRanges("source count range empty".into()));
        }
        if self.duration_s <= 0.0 || self.sample_rate == 0 {
            return Err(SceneError::BadRanges("non-positive duration or rate".into()));
        }
        Ok(())
    }
}

/// Deterministic sub-stream derivation (splitmix64 of seed + stream id).
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Positions for samples n = 0..N of the path formula, validated to stay
/// inside the room with [`WALL_MARGIN_M`] clearance.
pub fn sample_trajectory(spec: &TrajectorySpec, room: &RoomSpec) -> Result<Vec<Vec3>, SceneError> {
    if spec.n_samples == 0 {
        return Err(SceneError::EmptyTrajectory);
    }
    let mut positions = Vec::with_capacity(spec.n_samples);
    for n in 0..spec.n_samples {
        let p = spec.position_at(n as f64);
        for a in 0..3 {
            if p[a] < WALL_MARGIN_M || p[a] > room.dims[a] - WALL_MARGIN_M {
                return Err(SceneError::PathOutsideRoom { sample: n, axis: a });
            }
        }
        positions.push(p);
    }
    Ok(positions)
}

/// Draws a full scene from the given ranges. Rooms, T60 and noise SNR are
/// uniform over their ranges; trajectory endpoints are uniform inside the
/// room; oscillation counts are uniform in [0, 2] periods per axis and
/// amplitudes are bounded by half the clearance between the linear baseline
/// and the nearest wall. Per-source rejection sampling enforces wall margin
/// and the minimum source–array distance.
pub fn sample_scene(rng_seed: u64, ranges: &SamplingRanges) -> Result<SceneSpec, SceneError> {
    ranges.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(rng_seed, 0));
    let n_samples = (ranges.duration_s * ranges.sample_rate as f64).round() as usize;

    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };

    let dims = [
        uniform(&mut rng, ranges.dims_xy),
        uniform(&mut rng, ranges.dims_xy),
        uniform(&mut rng, ranges.dims_z),
    ];
    // Keep the array away from the walls; 35–65 % of each extent leaves at
    // least ~1 m of clearance in the smallest admissible room.
    let array_center = [
        dims[0] * rng.random_range(0.35..0.65),
        dims[1] * rng.random_range(0.35..0.65),
        dims[2] * rng.random_range(0.35..0.65),
    ];
    let room = RoomSpec {
        dims,
        t60: uniform(&mut rng, ranges.t60),
        array_center,
    };
    let noise_snr_db = uniform(&mut rng, ranges.noise_snr_db);
    let n_sources = if ranges.n_sources.0 == ranges.n_sources.1 {
        ranges.n_sources.0
    } else {
        rng.random_range(ranges.n_sources.0..=ranges.n_sources.1)
    };

    let mut sources = Vec::with_capacity(n_sources);
    for s in 0..n_sources {
        let mut src_rng = ChaCha8Rng::seed_from_u64(sub_seed(rng_seed, 1 + s as u64));
        let traj = sample_source_trajectory(&mut src_rng, &room, n_samples, rng_seed)?;
        let audio = SourceAudio::Synthetic {
            kind: ranges.source_kind,
            seed: sub_seed(rng_seed, 0x5151 + s as u64),
        };
        sources.push(SourceSpec { trajectory: traj, audio });
    }

    Ok(SceneSpec {
        room,
        sources,
        noise_snr_db,
        seed: rng_seed,
        sample_rate: ranges.sample_rate,
    })
}

fn sample_source_trajectory(
    rng: &mut ChaCha8Rng,
    room: &RoomSpec,
    n_samples: usize,
    seed: u64,
) -> Result<TrajectorySpec, SceneError> {
    // Endpoints get triple the wall margin so the sinusoid has headroom.
    let endpoint_margin = 3.0 * WALL_MARGIN_M;
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let draw_point = |rng: &mut ChaCha8Rng| -> Vec3 {
            [
                rng.random_range(endpoint_margin..room.dims[0] - endpoint_margin),
                rng.random_range(endpoint_margin..room.dims[1] - endpoint_margin),
                rng.random_range(endpoint_margin..room.dims[2] - endpoint_margin),
            ]
        };
        let p0 = draw_point(rng);
        let p_end = draw_point(rng);
        let mut omega = [0.0; 3];
        let mut amp = [0.0; 3];
        for a in 0..3 {
            let periods = rng.random_range(0.0..MAX_OSCILLATION_PERIODS);
            omega[a] = std::f64::consts::TAU * periods / n_samples as f64;
            let lo = p0[a].min(p_end[a]);
            let hi = p0[a].max(p_end[a]);
            let wall_clearance = lo.min(room.dims[a] - hi) - WALL_MARGIN_M;
            amp[a] = rng.random_range(0.0..=(0.5 * wall_clearance).max(0.0));
        }
        let spec = TrajectorySpec { p0, p_end, omega, amp, n_samples };
        let Ok(path) = sample_trajectory(&spec, room) else {
            continue;
        };
        let close = path
            .iter()
            .any(|&p| vec3::distance(p, room.array_center) < MIN_ARRAY_DISTANCE_M);
        if !close {
            return Ok(spec);
        }
    }
    Err(SceneError::Infeasible { seed, attempts: MAX_SAMPLING_ATTEMPTS })
}

/// A broken scene invariant. Violations are data: validation reports all of
/// them rather than failing on the first.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveDims { axis: usize },
    T60OutOfRange { t60: f64 },
    ArrayOutsideRoom { axis: usize },
    NoSources,
    EndpointOutsideRoom { source: usize, endpoint: &'static str, axis: usize },
    OscillationCapExceeded { source: usize, axis: usize, periods: f64 },
    PathOutsideRoom { source: usize, sample: usize, axis: usize },
    PathTooCloseToArray { source: usize, sample: usize, distance: f64 },
    LengthMismatch { source: usize, n_samples: usize, expected: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonPositiveDims { axis } => {
                write!(f, "room dimension on axis {axis} is not positive")
            }
            Violation::T60OutOfRange { t60 } => {
                write!(f, "t60 {t60} outside [0.2, 1.0] s")
            }
            Violation::ArrayOutsideRoom { axis } => {
                write!(f, "array center outside the room on axis {axis}")
            }
            Violation::NoSources => write!(f, "scene has no sources"),
            Violation::EndpointOutsideRoom { source, endpoint, axis } => write!(
                f,
                "source {source}: {endpoint} outside the room margin on axis {axis}"
            ),
            Violation::OscillationCapExceeded { source, axis, periods } => write!(
                f,
                "source {source}: {periods:.2} oscillation periods on axis {axis} exceed the cap of {MAX_OSCILLATION_PERIODS}"
            ),
            Violation::PathOutsideRoom { source, sample, axis } => write!(
                f,
                "source {source}: path leaves the room at sample {sample} on axis {axis}"
            ),
            Violation::PathTooCloseToArray { source, sample, distance } => write!(
                f,
                "source {source}: path within {distance:.3} m of the array at sample {sample} (minimum {MIN_ARRAY_DISTANCE_M} m)"
            ),
            Violation::LengthMismatch { source, n_samples, expected } => write!(
                f,
                "source {source}: trajectory length {n_samples} differs from the scene length {expected}"
            ),
        }
    }
}

/// Checks every scene invariant and returns all violations found.
pub fn validate_scene(spec: &SceneSpec) -> Vec<Violation> {
    let mut v = Vec::new();
    let room = &spec.room;
    for a in 0..3 {
        if !(room.dims[a] > 0.0) {
            v.push(Violation::NonPositiveDims { axis: a });
        }
    }
    if !(room.t60 >= 0.2 && room.t60 <= 1.0) {
        v.push(Violation::T60OutOfRange { t60: room.t60 });
    }
    for a in 0..3 {
        if !(room.array_center[a] > 0.0 && room.array_center[a] < room.dims[a]) {
            v.push(Violation::ArrayOutsideRoom { axis: a });
        }
    }
    if spec.sources.is_empty() {
        v.push(Violation::NoSources);
    }
    let expected_len = spec.sources.first().map(|s| s.trajectory.n_samples);
    for (s, source) in spec.sources.iter().enumerate() {
        let traj = &source.trajectory;
        for (name, p) in [("p0", traj.p0), ("pN", traj.p_end)] {
            for a in 0..3 {
                if p[a] < WALL_MARGIN_M || p[a] > room.dims[a] - WALL_MARGIN_M {
                    v.push(Violation::EndpointOutsideRoom { source: s, endpoint: name, axis: a });
                }
            }
        }
        let periods = traj.periods();
        for a in 0..3 {
            if periods[a] > MAX_OSCILLATION_PERIODS + 1e-9 {
                v.push(Violation::OscillationCapExceeded { source: s, axis: a, periods: periods[a] });
            }
        }
        if let Some(expected) = expected_len {
            if traj.n_samples != expected {
                v.push(Violation::LengthMismatch { source: s, n_samples: traj.n_samples, expected });
            }
        }
        // Walk the path once, recording only the first offending sample per kind.
        let mut outside_reported = false;
        let mut close_reported = false;
        for n in 0..traj.n_samples {
            let p = traj.position_at(n as f64);
            if !outside_reported {
                if let Some(a) =
                    (0..3).find(|&a| p[a] < WALL_MARGIN_M || p[a] > room.dims[a] - WALL_MARGIN_M)
                {
                    v.push(Violation::PathOutsideRoom { source: s, sample: n, axis: a });
                    outside_reported = true;
                }
            }
            if !close_reported {
                let d = vec3::distance(p, room.array_center);
                if d < MIN_ARRAY_DISTANCE_M {
                    v.push(Violation::PathTooCloseToArray { source: s, sample: n, distance: d });
                    close_reported = true;
                }
            }
            if outside_reported && close_reported {
                break;
            }
        }
    }
    v
}
