//! Drives the built `tracksep` binary through gen → run → eval → metrics.

use std::path::Path;
use std::process::Command;

fn tracksep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tracksep"))
}

fn write_small_gen_config(path: &Path) {
    let cfg = serde_json::json!({
        "n_scenes": 3,
        "ranges": {
            "dims_xy": [4.0, 7.0],
            "dims_z": [3.0, 4.0],
            "t60": [0.2, 1.0],
            "noise_snr_db": [20.0, 30.0],
            "n_sources": [2, 2],
            "duration_s": 0.5,
            "sample_rate": 8000,
            "source_kind": "bursts"
        },
        "render": { "max_order": 1, "noise": true }
    });
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn full_workflow_produces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("gen.json");
    write_small_gen_config(&cfg_path);
    let data_dir = dir.path().join("data");

    let out = tracksep()
        .args(["gen", "--out"])
        .arg(&data_dir)
        .args(["--config"])
        .arg(&cfg_path)
        .args(["--seed", "5", "--parallelism", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "gen failed: {}", String::from_utf8_lossy(&out.stderr));
    let manifest = data_dir.join("manifest.json");
    assert!(manifest.exists());

    let run_dir = dir.path().join("run");
    let out = tracksep()
        .arg("run")
        .arg(&manifest)
        .args(["--out"])
        .arg(&run_dir)
        .args(["--components", "oracle", "--rounds", "2", "--c-max", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir.join("run.json").exists());
    assert!(run_dir.join("scene_000/estimate_0.wav").exists());
    assert!(run_dir.join("scene_000/result.json").exists());

    let eval_dir = dir.path().join("eval");
    let agg_path = dir.path().join("aggregate.json");
    let out = tracksep()
        .arg("eval")
        .arg(&manifest)
        .arg(&run_dir)
        .args(["--out"])
        .arg(&eval_dir)
        .args(["--report"])
        .arg(&agg_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "eval failed: {}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("t60 bucket"), "table missing: {table}");
    assert!(table.contains("overall"));
    assert!(eval_dir.join("scene_000.report.json").exists());

    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&agg_path).unwrap()).unwrap();
    // Oracle components and a correct count: every SNR sits at the cap.
    assert_eq!(agg["overall"]["n_sources"].as_u64().unwrap(), 6);
    assert!(agg["overall"]["snr_db"].as_f64().unwrap() > 99.0);
    assert!(agg["provenance"]["components"].as_str().unwrap() == "oracle");
    assert!(agg["provenance"]["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn metrics_on_identical_files_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let wav_path = dir.path().join("a.wav");
    let samples: Vec<f32> = (0..4000).map(|i| (0.01 * i as f32).sin() * 0.4).collect();
    tracksep_cli::wav::write_wav(&wav_path, 1, 8000, &samples).unwrap();

    let out = tracksep()
        .arg("metrics")
        .arg(&wav_path)
        .arg(&wav_path)
        .args(["--sdr-filter-len", "16"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("SNR:"), "{text}");
    assert!(text.contains("100.00 dB"), "{text}");
}

#[test]
fn unknown_component_fails_with_machine_parsable_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("gen.json");
    write_small_gen_config(&cfg_path);
    let data_dir = dir.path().join("data");
    let out = tracksep()
        .args(["gen", "--out"])
        .arg(&data_dir)
        .args(["--config"])
        .arg(&cfg_path)
        .args(["--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());

    let out = tracksep()
        .arg("run")
        .arg(data_dir.join("manifest.json"))
        .args(["--out"])
        .arg(dir.path().join("run"))
        .args(["--components", "transformer"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line).expect("single JSON error line");
    assert!(
        parsed["error"].as_str().unwrap().contains("transformer"),
        "error must name the unknown component: {stderr}"
    );
}

#[test]
fn eval_rejects_corrupted_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("gen.json");
    write_small_gen_config(&cfg_path);
    let data_dir = dir.path().join("data");
    let status = tracksep()
        .args(["gen", "--out"])
        .arg(&data_dir)
        .args(["--config"])
        .arg(&cfg_path)
        .args(["--seed", "2"])
        .status()
        .unwrap();
    assert!(status.success());

    // Truncate one image so the shape check trips.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir.join("manifest.json")).unwrap())
            .unwrap();
    let image = manifest["entries"][0]["images"][0].as_str().unwrap();
    let (samples, fs) = tracksep_cli::wav::read_mono(&data_dir.join(image)).unwrap();
    tracksep_cli::wav::write_mono(&data_dir.join(image), &samples[..samples.len() / 2], fs)
        .unwrap();

    let out = tracksep()
        .arg("run")
        .arg(data_dir.join("manifest.json"))
        .args(["--out"])
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("validation"), "{stderr}");
}
