//! On-disk configuration for dataset generation and pipeline runs.

use serde::{Deserialize, Serialize};

use tracksep_core::acoustics::{BlockConfig, RenderConfig, RirConfig};
use tracksep_core::frame::FrameConfig;
use tracksep_core::pipeline::PipelineConfig;
use tracksep_core::scene::SamplingRanges;

/// Dataset generation settings. Desk-scale defaults: 20 scenes of 10 s at
/// 16 kHz with two sources each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_scenes: usize,
    pub ranges: SamplingRanges,
    pub render: RenderSettings,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { n_scenes: 20, ranges: SamplingRanges::default(), render: RenderSettings::default() }
    }
}

/// Rendering knobs persisted into the manifest so runs can re-render
/// groundtruth deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    /// `None` sizes the image set to cover `tail_factor · t60`.
    pub max_order: Option<u32>,
    pub tail_factor: f64,
    /// Cap on the modeled tail; keeps dense scenes affordable.
    pub max_tail_s: Option<f64>,
    pub block_len: usize,
    pub block_hop: usize,
    pub noise: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            max_order: None,
            tail_factor: 1.5,
            max_tail_s: Some(0.4),
            block_len: 512,
            block_hop: 256,
            noise: true,
        }
    }
}

impl RenderSettings {
    pub fn to_render_config(&self, sample_rate: u32) -> RenderConfig {
        RenderConfig {
            rir: RirConfig {
                sample_rate,
                max_order: self.max_order,
                tail_factor: self.tail_factor,
                max_tail_s: self.max_tail_s,
            },
            block: BlockConfig { len: self.block_len, hop: self.block_hop },
            noise: self.noise,
        }
    }
}

/// Pipeline-run settings; CLI flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub components: String,
    pub rounds: usize,
    pub c_max: usize,
    pub count_threshold: f64,
    pub frame_win: usize,
    pub frame_hop: usize,
    pub sdr_filter_len: usize,
    /// Seed for component-internal randomness (oracle corruption).
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            components: "classical".into(),
            rounds: 2,
            c_max: 2,
            count_threshold: 0.25,
            frame_win: 256,
            frame_hop: 128,
            sdr_filter_len: 512,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            rounds: self.rounds,
            c_max: self.c_max,
            count_threshold: self.count_threshold,
            frame: FrameConfig::new(self.frame_win, self.frame_hop),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
