//! Pluggable component contracts used by the pipeline, with classical DSP
//! and groundtruth-backed (oracle) implementations. No component carries
//! state across calls, so all of them are safe to invoke concurrently on
//! distinct inputs.

mod classical;
mod oracle;

pub use classical::{
    pseudo_intensity_track, steered_extract, ClusteredEnvelopeEstimator, PseudoIntensityTracker,
    SteeredExtract, SteeredExtractor, SteeredRefiner,
};
pub use oracle::{
    oracle_estimators, OracleCorruption, OracleEnvelopeEstimator, OracleExtractor, OracleRefiner,
    OracleSet, OracleTracker,
};

use thiserror::Error;

use crate::acoustics::FoaSignal;
use crate::envelope::{self, FrameEnvelope, SampleEnvelope};
use crate::frame::FrameConfig;
use crate::trajectory::{FramedIntensityTrajectory, Trajectory};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("signal of {n} samples is shorter than one window of {win}")]
    SignalTooShort { n: usize, win: usize },
    #[error("mixture is silent; nothing to estimate")]
    SilentInput,
    #[error("frame grid mismatch: fit has {fit} frames, signal implies {signal}")]
    FrameGridMismatch { fit: usize, signal: usize },
    #[error("groundtruth has {available} sources but {requested} channels were requested")]
    NotEnoughGroundtruth { available: usize, requested: usize },
    #[error("envelope error: {0}")]
    Envelope(#[from] crate::envelope::EnvelopeError),
    #[error("trajectory error: {0}")]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
}

/// Estimates one frame envelope per output channel from the mixture.
/// Implementations must return exactly `c_max` nonnegative envelopes.
pub trait EnvelopeEstimator {
    fn name(&self) -> &str;
    fn estimate(
        &self,
        mixture: &FoaSignal,
        c_max: usize,
        frame: FrameConfig,
    ) -> Result<Vec<FrameEnvelope>, EstimatorError>;
}

/// Tracks one source conditioned on its envelope; implementations should use
/// the separated signal instead of the mixture when one is supplied.
pub trait Tracker {
    fn name(&self) -> &str;
    fn track(
        &self,
        mixture: &FoaSignal,
        env: &SampleEnvelope,
        separated: Option<&FoaSignal>,
    ) -> Result<Trajectory, EstimatorError>;
}

/// Extracts the multichannel signal of the source described by a framed
/// intensity trajectory.
pub trait Extractor {
    fn name(&self) -> &str;
    fn extract(
        &self,
        mixture: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<FoaSignal, EstimatorError>;
}

/// Produces the final single-channel estimate on the reference (zeroth-order)
/// channel from the mixture, the separated signal and the refined trajectory.
pub trait RefinementExtractor {
    fn name(&self) -> &str;
    fn refine(
        &self,
        mixture: &FoaSignal,
        separated: &FoaSignal,
        fit: &FramedIntensityTrajectory,
    ) -> Result<Vec<f64>, EstimatorError>;
}

/// Per-scene groundtruth backing the oracle components and evaluation:
/// clean FOA images, unit-direction trajectories and the envelopes derived
/// from the clean reference channels.
#[derive(Debug, Clone)]
pub struct SceneGroundtruth {
    pub images: Vec<FoaSignal>,
    pub trajectories: Vec<Trajectory>,
    pub frame_envelopes: Vec<FrameEnvelope>,
    pub envelopes: Vec<SampleEnvelope>,
    pub frame: FrameConfig,
}

impl SceneGroundtruth {
    pub fn new(
        images: Vec<FoaSignal>,
        trajectories: Vec<Trajectory>,
        frame: FrameConfig,
    ) -> Result<Self, EstimatorError> {
        assert_eq!(images.len(), trajectories.len());
        let mut frame_envelopes = Vec::with_capacity(images.len());
        let mut envelopes = Vec::with_capacity(images.len());
        for im in &images {
            let fe = envelope::extract_envelope(im.omni(), frame)?;
            let se = envelope::interpolate_to_samples(&fe, im.len(), im.sample_rate)?;
            frame_envelopes.push(fe);
            envelopes.push(se);
        }
        Ok(Self { images, trajectories, frame_envelopes, envelopes, frame })
    }

    /// Builds groundtruth from a rendered scene; trajectories are the source
    /// positions seen from the array center.
    pub fn from_rendered(
        rendered: &crate::acoustics::RenderedScene,
        array_center: crate::vec3::Vec3,
        frame: FrameConfig,
    ) -> Result<Self, EstimatorError> {
        let trajectories = rendered
            .positions
            .iter()
            .map(|p| Trajectory::from_positions(p, array_center))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rendered.images.clone(), trajectories, frame)
    }

    pub fn n_sources(&self) -> usize {
        self.images.len()
    }
}
