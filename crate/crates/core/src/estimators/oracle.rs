//! Groundtruth-backed components with parameterized corruption. With zero
//! corruption they reproduce the groundtruth exactly; the corruption knobs
//! exist to exercise the pipeline's monotonicity behavior, not to model
//! networks.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acoustics::FoaSignal;
use crate::envelope::{FrameEnvelope, SampleEnvelope};
use crate::frame::FrameConfig;
use crate::scene::sub_seed;
use crate::trajectory::{
    frame_intensity_trajectory, make_intensity_trajectory, FramedIntensityTrajectory, Trajectory,
};
use crate::vec3;

use super::{
    EnvelopeEstimator, EstimatorError, Extractor, RefinementExtractor, SceneGroundtruth, Tracker,
};

/// Perturbation levels for the oracle components; all zero means exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCorruption {
    /// Additive envelope noise as a fraction of each source's envelope peak.
    pub envelope_noise: f64,
    /// Exact per-sample angular jitter (degrees) when tracking the mixture.
    pub tracker_jitter_deg: f64,
    /// Jitter used when a separated signal is provided; `None` reuses
    /// `tracker_jitter_deg`. A smaller value here makes each facilitation
    /// round an improvement, mirroring a tracker that benefits from cleaner
    /// input.
    pub tracker_jitter_separated_deg: Option<f64>,
    /// Fraction of the residual mixture leaked into extracted signals.
    pub extractor_leakage: f64,
    /// Fraction of the residual mixture leaked into the refined channel.
    pub refiner_leakage: f64,
    pub seed: u64,
}

impl Default for OracleCorruption {
    fn default() -> Self {
        Self {
            envelope_noise: 0.0,
            tracker_jitter_deg: 0.0,
            tracker_jitter_separated_deg: None,
            extractor_leakage: 0.0,
            refiner_leakage: 0.0,
            seed: 0,
        }
    }
}

/// Index of the groundtruth sample envelope closest to `env` in squared
/// error; this is how oracle components recognize which source a call is
/// about without carrying state.
fn match_by_envelope(gt: &SceneGroundtruth, env: &SampleEnvelope) -> usize {
    let sse = |a: &SampleEnvelope, b: &SampleEnvelope| -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    (0..gt.n_sources())
        .min_by(|&a, &b| sse(&gt.envelopes[a], env).total_cmp(&sse(&gt.envelopes[b], env)))
        .expect("groundtruth has sources")
}

/// Index of the source whose framed groundtruth intensity trajectory is
/// closest to `fit`.
fn match_by_fit(gt: &SceneGroundtruth, fit: &FramedIntensityTrajectory) -> usize {
    let frame = FrameConfig::new(fit.win, fit.hop);
    let mut best = 0;
    let mut best_sse = f64::INFINITY;
    for s in 0..gt.n_sources() {
        let it = make_intensity_trajectory(&gt.envelopes[s], &gt.trajectories[s])
            .expect("groundtruth lengths agree");
        let Ok(framed) = frame_intensity_trajectory(&it, frame) else {
            continue;
        };
        let sse: f64 = framed
            .vecs
            .iter()
            .zip(&fit.vecs)
            .map(|(a, b)| {
                let d = vec3::sub(*a, *b);
                vec3::dot(d, d)
            })
            .sum();
        if sse < best_sse {
            best_sse = sse;
            best = s;
        }
    }
    best
}

#[derive(Clone)]
pub struct OracleEnvelopeEstimator {
    gt: Arc<SceneGroundtruth>,
    corruption: OracleCorruption,
}

impl EnvelopeEstimator for OracleEnvelopeEstimator {
    fn name(&self) -> &str {
        "oracle-envelope"
    }

    fn estimate(
        &self,
        mixture: &FoaSignal,
        c_max: usize,
        frame: FrameConfig,
    ) -> Result<Vec<FrameEnvelope>, EstimatorError> {
        let gt = &self.gt;
        if c_max < gt.n_sources() {
            return Err(EstimatorError::NotEnoughGroundtruth {
                available: gt.n_sources(),
                requested: c_max,
            });
        }
        let t_frames = frame
            .frame_count(mixture.len())
            .ok_or(EstimatorError::SignalTooShort { n: mixture.len(), win: frame.win })?;
        let mut out = Vec::with_capacity(c_max);
        for s in 0..gt.n_sources() {
            let mut env = crate::envelope::extract_envelope(gt.images[s].omni(), frame)?;
            if self.corruption.envelope_noise > 0.0 {
                let peak = env.peak();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(sub_seed(self.corruption.seed, 0xE57 + s as u64));
                for v in &mut env.values {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v = (*v + self.corruption.envelope_noise * peak * n).max(0.0);
                }
            }
            out.push(env);
        }
        for _ in gt.n_sources()..c_max {
            out.push(FrameEnvelope { values: vec![0.0; t_frames], win: frame.win, hop: frame.hop });
        }
        Ok(out)
    }
}

#[derive(Clone)]
pub struct OracleTracker {
    gt: Arc<SceneGroundtruth>,
    corruption: OracleCorruption,
}

impl Tracker for OracleTracker {
    fn name(&self) -> &str {
        "oracle-tracker"
    }

    fn track(
        &self,
        _mixture: &FoaSignal,
        env: &SampleEnvelope,
        separated: Option<&FoaSignal>,
    ) -> Result<Trajectory, EstimatorError> {
        let s = match_by_envelope(&self.gt, env);
        let sigma_deg = if separated.is_some() {
            self.corruption
                .tracker_jitter_separated_deg
                .unwrap_or(self.corruption.tracker_jitter_deg)
        } else {
            self.corruption.tracker_jitter_deg
        };
        let gt_traj = &self.gt.trajectories[s];
        if sigma_deg == 0.0 {
            return Ok(gt_traj.clone());
        }
        // Rotate every sample by exactly sigma about a random orthogonal
        // axis: the per-sample angular error is sigma by construction.
        let phase = if separated.is_some() { 0x5E9u64 } else { 0 };
        let mut rng =
            ChaCha8Rng::seed_from_u64(sub_seed(self.corruption.seed, 0x7AC + s as u64 + phase));
        let angle = sigma_deg.to_radians();
        let dirs = gt_traj
            .dirs()
            .iter()
            .map(|&d| {
                let u = vec3::orthonormal_to(d);
                let v = vec3::cross(d, u);
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let axis = vec3::add(vec3::scale(u, theta.cos()), vec3::scale(v, theta.sin()));
                let rotated = vec3::rotate_about_axis(d, axis, angle);
                vec3::normalize(rotated).unwrap_or(d)
            })
            .collect();
        Ok(Trajectory::from_dirs(dirs)?)
    }
}

#[derive(Clone)]
pub struct OracleExtractor {
    gt: Arc<SceneGroundtruth>,
    corruption: OracleCorruption,
}

impl OracleExtractor {
    fn leak(&self, image: &FoaSignal, mixture: &FoaSignal, lambda: f64) -> FoaSignal {
        if lambda == 0.0 {
            return image.clone();
        }
        let mut out = image.clone();
        for c in 0..4 {
            let dst = out.channel_mut(c);
            for (i, d) in dst.iter_mut().enumerate() {
                *d += lambda * (mixture.channel(c)[i] - image.channel(c)[i]);
            }
        }
        out
    }
}

impl Extractor for OracleExtractor {
    fn extract(
        &self,
        mixture: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<FoaSignal, EstimatorError> {
        let s = match_by_fit(&self.gt, fit);
        Ok(self.leak(&self.gt.images[s], mixture, self.corruption.extractor_leakage))
    }

    fn name(&self) -> &str {
        "oracle-extractor"
    }
}

#[derive(Clone)]
pub struct OracleRefiner {
    gt: Arc<SceneGroundtruth>,
    corruption: OracleCorruption,
}

impl RefinementExtractor for OracleRefiner {
    fn name(&self) -> &str {
        "oracle-refiner"
    }

    fn refine(
        &self,
        mixture: &FoaSignal,
        _separated: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<Vec<f64>, EstimatorError> {
        let s = match_by_fit(&self.gt, fit);
        let image = self.gt.images[s].omni();
        let lambda = self.corruption.refiner_leakage;
        Ok(image
            .iter()
            .zip(mixture.omni())
            .map(|(&im, &mix)| im + lambda * (mix - im))
            .collect())
    }
}

/// The four oracle components over shared groundtruth.
pub struct OracleSet {
    pub envelope: OracleEnvelopeEstimator,
    pub tracker: OracleTracker,
    pub extractor: OracleExtractor,
    pub refiner: OracleRefiner,
}

impl OracleSet {
    pub fn components(&self) -> crate::pipeline::Components<'_> {
        crate::pipeline::Components {
            envelope: &self.envelope,
            tracker: &self.tracker,
            extractor: &self.extractor,
            refiner: &self.refiner,
        }
    }
}

/// Builds groundtruth-backed components; `corruption` of zero yields exact
/// oracles.
pub fn oracle_estimators(gt: Arc<SceneGroundtruth>, corruption: OracleCorruption) -> OracleSet {
    OracleSet {
        envelope: OracleEnvelopeEstimator { gt: Arc::clone(&gt), corruption },
        tracker: OracleTracker { gt: Arc::clone(&gt), corruption },
        extractor: OracleExtractor { gt: Arc::clone(&gt), corruption },
        refiner: OracleRefiner { gt, corruption },
    }
}
