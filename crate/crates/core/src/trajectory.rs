//! Direction trajectories, intensity trajectories and the tracking losses.
//!
//! A trajectory is one unit vector per sample pointing at the source; the
//! intensity trajectory scales each direction by the envelope value so the
//! vector carries energy and direction at once. MSE reductions average over
//! time and the three vector components.

use thiserror::Error;

use crate::envelope::SampleEnvelope;
use crate::frame::FrameConfig;
use crate::vec3::{self, Vec3};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("row {row} has norm {norm} (unit vectors required)")]
    NotUnit { row: usize, norm: f64 },
    #[error("row {row} is numerically zero and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("lengths do not match: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("signal of {n} samples is shorter than one window of {win}")]
    TooShortForFraming { n: usize, win: usize },
    #[error("differential scale {d} must satisfy 1 <= d < {n}")]
    BadScale { d: usize, n: usize },
    #[error("empty trajectory")]
    Empty,
}

/// Per-sample unit directions (XYZ) pointing at the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dirs: Vec<Vec3>,
}

impl Trajectory {
    /// Wraps precomputed directions, enforcing unit norm within 1e-6.
    pub fn from_dirs(dirs: Vec<Vec3>) -> Result<Self, TrajectoryError> {
        if dirs.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (row, d) in dirs.iter().enumerate() {
            let n = vec3::norm(*d);
            if (n - 1.0).abs() > 1e-6 {
                return Err(TrajectoryError::NotUnit { row, norm: n });
            }
        }
        Ok(Self { dirs })
    }

    /// Directions from positions as seen from `origin`.
    pub fn from_positions(positions: &[Vec3], origin: Vec3) -> Result<Self, TrajectoryError> {
        let dirs = positions
            .iter()
            .enumerate()
            .map(|(row, &p)| {
                vec3::normalize(vec3::sub(p, origin)).ok_or(TrajectoryError::ZeroRow { row })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_dirs(dirs)
    }

    pub fn dirs(&self) -> &[Vec3] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Per-sample 3-vectors whose norm is the envelope value.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrajectory {
    pub vecs: Vec<Vec3>,
}

impl IntensityTrajectory {
    pub fn len(&self) -> usize {
        self.vecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vecs.is_empty()
    }
}

/// Frame-rate intensity trajectory: each row is the mean of the sample
/// vectors inside that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedIntensityTrajectory {
    pub vecs: Vec<Vec3>,
    pub win: usize,
    pub hop: usize,
}

impl FramedIntensityTrajectory {
    pub fn frames(&self) -> usize {
        self.vecs.len()
    }
}

/// Weights and dyadic-scale budget for [`tracking_loss`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrackLossConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Largest dyadic scale exponent D; scales are 2^0 .. 2^D.
    pub max_scale_exp: u32,
}

impl Default for TrackLossConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5, max_scale_exp: 10 }
    }
}

/// Row n of the result is `env(n) · traj(n)`.
pub fn make_intensity_trajectory(
    env: &SampleEnvelope,
    traj: &Trajectory,
) -> Result<IntensityTrajectory, TrajectoryError> {
    if env.len() != traj.len() {
        return Err(TrajectoryError::LengthMismatch(env.len(), traj.len()));
    }
    let vecs = env
        .values
        .iter()
        .zip(traj.dirs())
        .map(|(&e, &d)| vec3::scale(d, e))
        .collect();
    Ok(IntensityTrajectory { vecs })
}

/// Frame t is the mean of the sample vectors over `[t·hop, t·hop + win)`.
pub fn frame_intensity_trajectory(
    it: &IntensityTrajectory,
    frame: FrameConfig,
) -> Result<FramedIntensityTrajectory, TrajectoryError> {
    let t_frames = frame
        .frame_count(it.len())
        .ok_or(TrajectoryError::TooShortForFraming { n: it.len(), win: frame.win })?;
    let vecs = (0..t_frames)
        .map(|t| {
            let start = frame.start(t);
            let mut acc = [0.0; 3];
            for v in &it.vecs[start..start + frame.win] {
                acc = vec3::add(acc, *v);
            }
            vec3::scale(acc, 1.0 / frame.win as f64)
        })
        .collect();
    Ok(FramedIntensityTrajectory { vecs, win: frame.win, hop: frame.hop })
}

/// Mean over samples and components of the squared difference of the two
/// envelope-weighted trajectories: `mean(|env(n)·(est(n) - trg(n))|²)` with a
/// 1/3 component mean. `weight_env` is the weighting envelope; pass the
/// estimated envelope for the printed form of the loss, or the groundtruth
/// envelope for the ablation variant.
pub fn trajectory_loss(
    est: &Trajectory,
    trg: &Trajectory,
    weight_env: &SampleEnvelope,
) -> Result<f64, TrajectoryError> {
    if est.len() != trg.len() {
        return Err(TrajectoryError::LengthMismatch(est.len(), trg.len()));
    }
    if weight_env.len() != est.len() {
        return Err(TrajectoryError::LengthMismatch(weight_env.len(), est.len()));
    }
    let n = est.len();
    let mut acc = 0.0;
    for ((e, t), &w) in est.dirs().iter().zip(trg.dirs()).zip(&weight_env.values) {
        for a in 0..3 {
            let d = w * (e[a] - t[a]);
            acc += d * d;
        }
    }
    Ok(acc / (3.0 * n as f64))
}

/// Differences at time scale `d` over raw vector rows: row n is
/// `rows(n) - rows(n-d)` for `n` in `[d, N)`, so the result has `N - d`
/// rows. Defined on arbitrary rows since any constant offset cancels.
pub fn differential_rows(rows: &[Vec3], d: usize) -> Result<Vec<Vec3>, TrajectoryError> {
    let n = rows.len();
    if d < 1 || d >= n {
        return Err(TrajectoryError::BadScale { d, n });
    }
    Ok((d..n).map(|i| vec3::sub(rows[i], rows[i - d])).collect())
}

/// Differences at time scale `d`: row n is `traj(n) - traj(n-d)` for
/// `n` in `[d, N)`.
pub fn differential(traj: &Trajectory, d: usize) -> Result<Vec<Vec3>, TrajectoryError> {
    differential_rows(traj.dirs(), d)
}

fn differential_mse(est: &[Vec3], trg: &[Vec3], d: usize) -> Result<f64, TrajectoryError> {
    let de = differential_rows(est, d)?;
    let dt = differential_rows(trg, d)?;
    let mut acc = 0.0;
    for (a, b) in de.iter().zip(&dt) {
        for c in 0..3 {
            let diff = a[c] - b[c];
            acc += diff * diff;
        }
    }
    Ok(acc / (3.0 * de.len() as f64))
}

/// Mean over dyadic scales `d = 2^i`, `i` in `[0, D]`, of the MSE between the
/// scale-`d` differentials of the two row sequences. Requires `2^D < N`.
pub fn differential_loss_rows(
    est: &[Vec3],
    trg: &[Vec3],
    max_scale_exp: u32,
) -> Result<f64, TrajectoryError> {
    if est.len() != trg.len() {
        return Err(TrajectoryError::LengthMismatch(est.len(), trg.len()));
    }
    let n = est.len();
    let largest = 1usize << max_scale_exp;
    if largest >= n {
        return Err(TrajectoryError::BadScale { d: largest, n });
    }
    let mut acc = 0.0;
    for i in 0..=max_scale_exp {
        acc += differential_mse(est, trg, 1usize << i)?;
    }
    Ok(acc / (max_scale_exp + 1) as f64)
}

/// [`differential_loss_rows`] over unit-direction trajectories.
pub fn differential_loss(
    est: &Trajectory,
    trg: &Trajectory,
    max_scale_exp: u32,
) -> Result<f64, TrajectoryError> {
    differential_loss_rows(est.dirs(), trg.dirs(), max_scale_exp)
}

/// `alpha · trajectory_loss + beta · differential_loss`. The scale budget is
/// clipped to the largest exponent usable at this trajectory length, so short
/// utterances skip the scales they cannot support.
pub fn tracking_loss(
    est: &Trajectory,
    trg: &Trajectory,
    weight_env: &SampleEnvelope,
    cfg: &TrackLossConfig,
) -> Result<f64, TrajectoryError> {
    if est.len() < 2 {
        return Err(TrajectoryError::BadScale { d: 1, n: est.len() });
    }
    let max_usable = (est.len() as f64 - 1.0).log2().floor() as u32;
    let exp = cfg.max_scale_exp.min(max_usable);
    Ok(cfg.alpha * trajectory_loss(est, trg, weight_env)?
        + cfg.beta * differential_loss(est, trg, exp)?)
}
