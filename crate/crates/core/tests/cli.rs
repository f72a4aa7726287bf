use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn evsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evsteer")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn sim_config() -> Value {
    json!({
        "width": 16, "height": 16, "duration_us": 6_000_000, "contrast_threshold": 0.2,
        "frame_period_us": 50_000, "noise_rate": 0.5, "seed": 3,
        "scene": {
            "kind": "translating_texture",
            "angle": {"type": "sines", "offset": 0.0, "components": [{"amplitude": 20.0, "period_s": 2.0}]},
            "speed": {"type": "constant", "value": 40.0}
        }
    })
}

fn experiment(lr: f64) -> Value {
    json!({
        "train_len_us": 2_000_000, "test_len_us": 1_000_000,
        "model": {"input_channels": 2, "stem_channels": 2, "num_residual_blocks": 1, "head_hidden": 4, "seed": 0},
        "train": {"learning_rate": lr, "batch_size": 16, "epochs": 1, "momentum": 0.9, "seed": 0}
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sim.json");
    let exp_path = dir.path().join("exp.json");
    let data = dir.path().join("rec");
    fs::write(&cfg_path, sim_config().to_string()).unwrap();
    fs::write(&exp_path, experiment(0.01).to_string()).unwrap();

    let out = evsteer(&["simulate", "--config", s(&cfg_path), "--out", s(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("events.evt1").is_file());
    assert_eq!(fs::read_dir(data.join("frames")).unwrap().count(), 120);
    let labels = fs::read_to_string(data.join("labels.csv")).unwrap();
    assert!(labels.starts_with("t_us,angle_deg,speed_kmh\n"));

    let events = data.join("events.evt1");
    for kind in ["events", "gray", "graydiff"] {
        let fdir = dir.path().join(format!("frames_{kind}"));
        let out = evsteer(&[
            "frames",
            "--events",
            s(&events),
            "--T-ms",
            "50",
            "--stride-ms",
            "100",
            "--kind",
            kind,
            "--out",
            s(&fdir),
        ]);
        assert_eq!(code(&out), 0, "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        let n = fs::read_dir(&fdir).unwrap().count();
        assert!(n >= 55, "{kind}: {n} files");
    }
    let plus = fs::read(dir.path().join("frames_events/000000_plus.pgm")).unwrap();
    assert!(plus.starts_with(b"P5\n"));

    let model = dir.path().join("m.evsm");
    let out = evsteer(&[
        "train",
        "--data",
        s(&data),
        "--input",
        "events",
        "--T-ms",
        "50",
        "--epochs",
        "1",
        "--seed",
        "1",
        "--out",
        s(&model),
        "--experiment",
        s(&exp_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report.json");
    let out = evsteer(&["eval", "--model", s(&model), "--data", s(&data), "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["rmse_deg", "eva", "n_samples", "input_kind", "T_ms", "relative_error_bins"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert_eq!(rep["input_kind"], "events");
    assert_eq!(rep["T_ms"], 50.0);

    let sweep = dir.path().join("sweep.csv");
    let out = evsteer(&[
        "sweep",
        "--data",
        s(&data),
        "--times-ms",
        "50,25",
        "--seed",
        "1",
        "--report",
        s(&sweep),
        "--experiment",
        s(&exp_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&sweep).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("T_ms,input_kind,rmse_deg,eva"));
    assert!(lines[1].starts_with("25,") && lines[2].starts_with("50,"), "{csv}");

    let cmp = dir.path().join("compare.csv");
    let out = evsteer(&[
        "compare",
        "--data",
        s(&data),
        "--kinds",
        "events,gray,graydiff",
        "--seed",
        "1",
        "--report",
        s(&cmp),
        "--experiment",
        s(&exp_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&cmp).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")), "{csv}");

    // Training divergence maps to exit code 3.
    fs::write(&exp_path, experiment(1e12).to_string()).unwrap();
    let out = evsteer(&[
        "train",
        "--data",
        s(&data),
        "--input",
        "events",
        "--T-ms",
        "50",
        "--epochs",
        "3",
        "--seed",
        "1",
        "--out",
        s(&dir.path().join("bad.evsm")),
        "--experiment",
        s(&exp_path),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(code(&evsteer(&[])), 1);
    assert_eq!(code(&evsteer(&["train", "--data", "x"])), 1);
    assert_eq!(
        code(&evsteer(&[
            "frames",
            "--events",
            "e",
            "--T-ms",
            "ten",
            "--stride-ms",
            "1",
            "--kind",
            "events",
            "--out",
            "o"
        ])),
        1
    );
    assert_eq!(code(&evsteer(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out =
        evsteer(&["eval", "--model", s(&missing), "--data", s(&missing), "--report", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 2);
    let bogus = dir.path().join("bogus.evt1");
    fs::write(&bogus, b"EVT0garbage").unwrap();
    let out = evsteer(&[
        "frames",
        "--events",
        s(&bogus),
        "--T-ms",
        "10",
        "--stride-ms",
        "10",
        "--kind",
        "events",
        "--out",
        s(&dir.path().join("f")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let bad_model = dir.path().join("m.evsm");
    fs::write(&bad_model, b"not a model").unwrap();
    let out = evsteer(&[
        "eval",
        "--model",
        s(&bad_model),
        "--data",
        s(dir.path()),
        "--report",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&out), 2);
}
