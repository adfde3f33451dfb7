//! Simulation, evaluation and classical pipeline for separating moving sound
//! sources in first-order ambisonics.
//!
//! The crate covers the full loop: sampling randomized rooms and sinusoidal
//! source trajectories ([`scene`]), rendering them to FOA through
//! image-source impulse responses with block-wise time variation
//! ([`acoustics`]), envelope and intensity-trajectory machinery with their
//! losses ([`envelope`], [`trajectory`]), separation and tracking metrics
//! ([`metrics`]), pluggable estimator components with classical and oracle
//! implementations ([`estimators`]), and the three-stage
//! track–separate–refine orchestration ([`pipeline`]).

pub mod acoustics;
pub mod db;
pub mod envelope;
pub mod estimators;
pub mod frame;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod trajectory;
pub mod vec3;

pub use acoustics::{FoaRir, FoaSignal, MixOutput, RenderConfig, RenderedScene};
pub use envelope::{FrameEnvelope, SampleEnvelope};
pub use estimators::{
    EnvelopeEstimator, Extractor, RefinementExtractor, SceneGroundtruth, Tracker,
};
pub use frame::FrameConfig;
pub use metrics::{CountVerdict, EvalReport, SourceEval};
pub use pipeline::{Components, EvalConfig, PipelineConfig, PipelineResult};
pub use scene::{RoomSpec, SamplingRanges, SceneSpec, SourceAudio, TrajectorySpec};
pub use trajectory::{FramedIntensityTrajectory, IntensityTrajectory, Trajectory};
pub use vec3::Vec3;
