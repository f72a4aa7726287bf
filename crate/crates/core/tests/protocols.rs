use evsteer_core::eval::{compare_inputs, sweep_integration_time, write_rows_csv, EvalError, ExperimentConfig};
use evsteer_core::frames::InputKind;
use evsteer_core::nn::{ModelConfig, TrainConfig};
use evsteer_core::sim::{
    generate_recording, LabeledRecording, Profile, SceneKind, SceneSpec, SimConfig, SineComponent,
};

fn recording(angle: Profile) -> LabeledRecording {
    let cfg = SimConfig {
        width: 12,
        height: 12,
        duration_us: 6_000_000,
        contrast_threshold: 0.2,
        frame_period_us: 50_000,
        noise_rate: 0.0,
        seed: 0,
        scene: SceneSpec::new(SceneKind::TranslatingTexture, angle, Profile::constant(40.0)),
    };
    generate_recording(&cfg).unwrap()
}

fn small() -> ExperimentConfig {
    ExperimentConfig {
        train_len_us: 2_000_000,
        test_len_us: 1_000_000,
        model: ModelConfig { input_channels: 2, stem_channels: 2, num_residual_blocks: 1, head_hidden: 4, seed: 0 },
        train: TrainConfig { learning_rate: 0.01, batch_size: 16, epochs: 2, momentum: 0.9, seed: 0 },
        ..ExperimentConfig::default()
    }
}

#[test]
fn static_recording_is_fit_by_every_kind() {
    let rec = recording(Profile::constant(0.0));
    assert!(rec.events.is_empty());
    let rows = compare_inputs(&rec, &InputKind::ALL, &small()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let rep = r.result.as_ref().unwrap();
        assert!(rep.rmse_deg < 1e-6, "{}: {}", r.input_kind, rep.rmse_deg);
        assert_eq!(rep.eva, None);
    }
}

#[test]
fn single_kind_and_single_time_give_one_row() {
    let angle = Profile::Sines {
        offset: 0.0,
        components: vec![SineComponent { amplitude: 20.0, period_s: 2.0, phase_rad: 0.0 }],
    };
    let rec = recording(angle);
    let rows = compare_inputs(&rec, &[InputKind::Events], &small()).unwrap();
    assert_eq!(rows.len(), 1);
    let rows = sweep_integration_time(&rec, &[50], &small());
    assert_eq!(rows.len(), 1);
    let rep = rows[0].result.as_ref().unwrap();
    assert!(rep.rmse_deg.is_finite() && rep.n_samples > 0);
    assert_eq!(rep.integration_time_ms, 50.0);
}

#[test]
fn sweep_keeps_going_past_failures_and_sorts_by_time() {
    let angle = Profile::Sines {
        offset: 0.0,
        components: vec![SineComponent { amplitude: 20.0, period_s: 2.0, phase_rad: 0.0 }],
    };
    let rec = recording(angle);
    // A window longer than the recording yields no samples for that entry.
    let rows = sweep_integration_time(&rec, &[60_000, 25, 50], &small());
    let times: Vec<f64> = rows.iter().map(|r| r.integration_time_ms).collect();
    assert_eq!(times, vec![25.0, 50.0, 60_000.0]);
    assert!(rows[0].result.is_ok() && rows[1].result.is_ok());
    assert!(rows[2].result.is_err());
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(3).unwrap().contains("error"));
}

#[test]
fn missing_grayscale_frames_are_rejected() {
    let mut rec = recording(Profile::constant(5.0));
    rec.gray_frames.clear();
    let err = compare_inputs(&rec, &[InputKind::Events, InputKind::Gray], &small()).unwrap_err();
    assert!(matches!(err, EvalError::MissingModality(_)));
}
