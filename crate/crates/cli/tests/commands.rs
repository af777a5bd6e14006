use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use encgan::model::{checkpoint_save, ModelBundle, ModelConfig};
use serde_json::{json, Value};

fn encgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_encgan"))
        .args(args)
        .env_remove("ENCGAN_CONFIG")
        .env_remove("ENCGAN_OUT")
        .env_remove("ENCGAN_SEED")
        .env_remove("ENCGAN_JOBS")
        .output()
        .expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    encgan(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn ok(output: Output) -> Output {
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    output
}

fn write_json(path: &Path, v: &Value) -> PathBuf {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(output: &Output) -> Value {
    let text = String::from_utf8_lossy(&output.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn model() -> Value {
    json!({ "latent_dim": 8, "channels": 4, "image_channels": 1, "resolution": 8, "init_seed": 3 })
}

fn gen_data(root: &Path, gamma: f64) -> PathBuf {
    let cfg = write_json(
        &root.join("gen.json"),
        &json!({
            "source": { "synthetic": {
                "corpus": { "resolution": 8, "seed": 4 },
                "counts": { "train_normals": 40, "train_anomalies": 10, "test_normals": 12, "test_anomalies": 12 }
            }},
            "gamma": gamma,
            "rotations": 1,
            "seed": 4
        }),
    );
    let data = root.join("data");
    ok(run("gen-data", &cfg, &data));
    data
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn zero_step_training_writes_the_initial_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(tmp.path(), 0.0);
    let cfg = write_json(
        &tmp.path().join("train.json"),
        &json!({ "data": data, "model": model(), "train": { "steps_per_phase": 0 } }),
    );
    let run_dir = tmp.path().join("run");
    ok(run("train", &cfg, &run_dir));

    let init: ModelConfig = serde_json::from_value(model()).unwrap();
    let reference = tmp.path().join("reference");
    checkpoint_save(&ModelBundle::<f32>::new(init).unwrap(), &reference).unwrap();
    assert_eq!(dir_bytes(&run_dir.join("checkpoint")), dir_bytes(&reference));
    assert!(run_dir.join("resolved_config.json").exists());
}

#[test]
fn hand_built_scores_give_three_quarters() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.csv");
    fs::write(
        &scores,
        "source_id,L_n,L_r,L_o,a,is_anomaly\n\
         n1,0,0,0,0.1,false\n\
         n2,0,0,0,0.3,false\n\
         a1,0,0,0,0.2,false\n\
         a2,0,0,0,0.4,false\n",
    )
    .unwrap();
    let labels = tmp.path().join("labels.csv");
    fs::write(&labels, "source_id,label\nn1,normal\nn2,normal\na1,anomaly\na2,anomaly\n").unwrap();
    let cfg = write_json(&tmp.path().join("eval.json"), &json!({ "scores": scores, "labels": labels }));
    let out = tmp.path().join("eval");
    ok(run("evaluate", &cfg, &out));
    let summary = read_json(&out.join("summary.json"));
    assert!((summary["auc"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!(out.join("roc.csv").exists() && out.join("roc.svg").exists());
}

#[test]
fn unknown_key_exits_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(&tmp.path().join("bad.json"), &json!({ "train": { "stepz_per_phase": 3 } }));
    let output = run("train", &cfg, &tmp.path().join("out"));
    assert_eq!(output.status.code(), Some(2));
    let err = stderr_json(&output);
    assert!(err["message"].as_str().unwrap().contains("stepz_per_phase"), "{err}");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn missing_inputs_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let output = run("train", &tmp.path().join("nope.json"), &tmp.path().join("out"));
    assert_eq!(output.status.code(), Some(3));

    let cfg = write_json(&tmp.path().join("train.json"), &json!({ "data": tmp.path().join("absent") }));
    let output = run("train", &cfg, &tmp.path().join("out"));
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(stderr_json(&output)["exit_code"], 3);
}

#[test]
fn bad_flags_exit_two() {
    let output = encgan(&["train", "--out", "x", "--seed", "not-a-number"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn pipeline_from_data_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = gen_data(tmp.path(), 0.1);
    let meta = read_json(&data.join("meta.json"));
    // 40 normals with one rotated copy each, γ = 0.1 → round(80·0.1/0.9) = 9 anomalies
    assert_eq!((meta["train_normals"].as_u64(), meta["train_anomalies"].as_u64()), (Some(80), Some(9)), "{meta}");

    let run_dir = tmp.path().join("run");
    let cfg = write_json(
        &tmp.path().join("train.json"),
        &json!({ "data": data, "model": model(), "train": { "steps_per_phase": 3, "batch_start": 4, "batch_end": 4 } }),
    );
    ok(run("train", &cfg, &run_dir));
    let log = fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
    // 8×8 trains without growing: one phase of three logged steps
    assert_eq!(log.lines().count(), 1 + 3);
    assert_eq!(run_dir.join("checkpoints").read_dir().unwrap().count(), 1);

    let cfg = write_json(
        &tmp.path().join("score.json"),
        &json!({ "checkpoint": run_dir.join("checkpoint"), "data": data, "reconstructions": true }),
    );
    ok(run("score", &cfg, &run_dir));
    let scores = fs::read_to_string(run_dir.join("scores.csv")).unwrap();
    assert!(scores.starts_with("source_id,L_n,L_r,L_o,a,is_anomaly"));
    assert_eq!(scores.lines().count(), 25);
    assert_eq!(run_dir.join("reconstructions").read_dir().unwrap().count(), 24);

    let cfg = write_json(
        &tmp.path().join("eval.json"),
        &json!({ "checkpoint": run_dir.join("checkpoint"), "data": data, "bins": 8 }),
    );
    ok(run("evaluate", &cfg, &run_dir));
    let summary = read_json(&run_dir.join("summary.json"));
    assert_eq!(summary["positives"], 12);
    assert_eq!(summary["negatives"], 12);
    for f in ["roc.csv", "latent_coeffs.csv", "latent_norms.csv", "projection.csv", "latent_histograms.svg"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }

    ok(encgan(&["report", "--out", run_dir.to_str().unwrap()]));
    let md = fs::read_to_string(run_dir.join("report.md")).unwrap();
    assert!(md.contains("AUC") || md.contains("auc"), "{md}");
}

#[test]
fn sweep_records_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(
        &tmp.path().join("sweep.json"),
        &json!({
            "source": { "synthetic": {
                "corpus": { "resolution": 8 },
                "counts": { "train_normals": 20, "train_anomalies": 5, "test_normals": 8, "test_anomalies": 8 }
            }},
            "sweep": {
                "grid": { "gammas": [0.0, 0.1], "encoder_modes": ["joint_image_space", "post_hoc"], "seeds": [0] },
                "model": model(),
                "train": { "steps_per_phase": 2, "batch_start": 4, "batch_end": 4 }
            }
        }),
    );
    let out = tmp.path().join("sweep");
    ok(encgan(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    // 2 γ × 2 modes × 4 variants
    assert_eq!(csv.lines().count(), 1 + 16);
    assert!(out.join("sweep.md").exists());

    let budget = write_json(
        &tmp.path().join("budget.json"),
        &json!({ "sweep": { "model": model(), "max_total_steps": 1 } }),
    );
    let output = run("sweep", &budget, &tmp.path().join("over"));
    assert_eq!(output.status.code(), Some(1));
    let err = stderr_json(&output);
    assert_eq!(err["error"], "runtime");
    assert!(err["message"].as_str().unwrap().contains("budget"), "{err}");
}
