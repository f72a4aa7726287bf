//! The motion-coded synthetic benchmark: a log-sawtooth texture whose
//! horizontal velocity is proportional to the upcoming steering angle, so
//! the target is visible in motion but not in appearance.

use super::experiment::ExperimentConfig;
use crate::frames::{EventScaling, InputKind};
use crate::labels::PipelineConfig;
use crate::nn::{ModelConfig, TrainConfig};
use crate::sim::{Profile, SceneKind, SceneSpec, SimConfig, SineComponent, TextureParams};

/// Seeds used for repeated benchmark runs.
pub const BENCHMARK_SEEDS: [u64; 3] = [1, 2, 3];

const SECOND: u64 = 1_000_000;

pub fn benchmark_sim_config(seed: u64) -> SimConfig {
    let pipeline = PipelineConfig::default();
    let sine = |amplitude: f64, period_s: f64, phase_rad: f64| SineComponent { amplitude, period_s, phase_rad };
    let angle = Profile::Sines {
        offset: 0.0,
        components: vec![sine(18.0, 9.7, 0.3), sine(11.0, 4.1, 1.9), sine(6.0, 2.3, 4.0)],
    };
    let speed = Profile::Sines { offset: 40.0, components: vec![sine(8.0, 23.0, 0.0)] };
    let mut scene = SceneSpec::new(SceneKind::TranslatingTexture, angle, speed);
    scene.texture = TextureParams {
        low: 20.0,
        high: 200.0,
        period_px: 16.0,
        edge_px: 1.0,
        slant: 0.25,
        px_per_s_per_deg: 2.0,
        lead_us: pipeline.horizon_us().round() as u64,
        ..TextureParams::default()
    };
    SimConfig {
        width: 64,
        height: 64,
        duration_us: 100 * SECOND,
        contrast_threshold: 0.2,
        frame_period_us: 50_000,
        noise_rate: 1.0,
        seed,
        scene,
    }
}

/// Experiment defaults for the benchmark: fixed 50 ms stride with window
/// ends aligned for every swept `T`, and 6 s / 4 s alternating segments.
pub fn benchmark_experiment(kind: InputKind, integration_time_ms: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        input_kind: kind,
        integration_time_us: integration_time_ms * 1000,
        stride_us: 50_000,
        first_end_us: Some(200_000),
        train_len_us: 6 * SECOND,
        test_len_us: 4 * SECOND,
        scaling: EventScaling::PerFrameMax,
        pipeline: PipelineConfig { seed, ..PipelineConfig::default() },
        model: ModelConfig { seed, ..ModelConfig::default() },
        train: TrainConfig { learning_rate: 0.02, batch_size: 32, epochs: 15, momentum: 0.9, seed },
        ..ExperimentConfig::default()
    }
}
