//! Shared scene builders for the integration tests: controlled anechoic
//! scenes with hand-placed sources so angular separation and activity are
//! deterministic.

use tracksep_core::acoustics::{render_scene, RenderConfig, RenderedScene, RirConfig};
use tracksep_core::estimators::SceneGroundtruth;
use tracksep_core::frame::FrameConfig;
use tracksep_core::scene::{
    RoomSpec, SceneSpec, SignalKind, SourceAudio, SourceSpec, TrajectorySpec,
};
use tracksep_core::vec3::Vec3;

pub const FS: u32 = 16_000;

pub struct TestScene {
    pub spec: SceneSpec,
    pub rendered: RenderedScene,
    pub groundtruth: SceneGroundtruth,
}

/// Source placement: azimuth in degrees around the array at the given radius,
/// with a small sinusoidal wobble.
pub struct Placement {
    pub azimuth_deg: f64,
    pub radius: f64,
    pub seed: u64,
}

pub fn anechoic_scene(seed: u64, placements: &[Placement], duration_s: f64) -> TestScene {
    let room = RoomSpec { dims: [8.0, 8.0, 4.0], t60: 0.3, array_center: [4.0, 4.0, 2.0] };
    let n = (duration_s * FS as f64) as usize;
    let sources = placements
        .iter()
        .map(|p| {
            let az = p.azimuth_deg.to_radians();
            let center: Vec3 = [
                room.array_center[0] + p.radius * az.cos(),
                room.array_center[1] + p.radius * az.sin(),
                room.array_center[2],
            ];
            // Drift a little along the tangent, with a slight radial wobble.
            let tangent = [-az.sin(), az.cos(), 0.0];
            let drift = 0.3;
            let p0 = [
                center[0] - 0.5 * drift * tangent[0],
                center[1] - 0.5 * drift * tangent[1],
                center[2],
            ];
            let p_end = [
                center[0] + 0.5 * drift * tangent[0],
                center[1] + 0.5 * drift * tangent[1],
                center[2],
            ];
            SourceSpec {
                trajectory: TrajectorySpec {
                    p0,
                    p_end,
                    omega: [0.0, 0.0, std::f64::consts::TAU * 1.0 / n as f64],
                    amp: [0.0, 0.0, 0.05],
                    n_samples: n,
                },
                audio: SourceAudio::Synthetic { kind: SignalKind::Bursts, seed: p.seed },
            }
        })
        .collect();
    let spec = SceneSpec { room, sources, noise_snr_db: 30.0, seed, sample_rate: FS };
    render(spec, true)
}

pub fn render(spec: SceneSpec, anechoic: bool) -> TestScene {
    let signals: Vec<Vec<f64>> = spec
        .sources
        .iter()
        .map(|s| {
            s.audio
                .synthesize(s.trajectory.n_samples, spec.sample_rate)
                .expect("synthetic sources")
        })
        .collect();
    let cfg = RenderConfig {
        rir: if anechoic {
            RirConfig::anechoic(spec.sample_rate)
        } else {
            RirConfig { sample_rate: spec.sample_rate, ..Default::default() }
        },
        noise: false,
        ..Default::default()
    };
    let rendered = render_scene(&spec, &signals, &cfg).expect("render");
    let groundtruth =
        SceneGroundtruth::from_rendered(&rendered, spec.room.array_center, FrameConfig::default())
            .expect("groundtruth");
    TestScene { spec, rendered, groundtruth }
}

pub fn mean_angular_separation_deg(gt: &SceneGroundtruth) -> f64 {
    let a = &gt.trajectories[0];
    let b = &gt.trajectories[1];
    let n = a.len();
    let total: f64 = a
        .dirs()
        .iter()
        .zip(b.dirs())
        .map(|(u, v)| tracksep_core::metrics::angular_error_deg(*u, *v).unwrap())
        .sum();
    total / n as f64
}
