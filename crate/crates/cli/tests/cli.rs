mod common;

use std::path::Path;

use common::{bin, build_dataset, read_lines, run};
use serde_json::Value;

fn stderr_error(out: &std::process::Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn make_fixture(dir: &Path, records: usize, drop_mask: Option<usize>) {
    let mut cmd = bin();
    cmd.args(["make-fixture", "--records", &records.to_string(), "--out"])
        .arg(dir);
    if let Some(i) = drop_mask {
        cmd.args(["--drop-mask", &i.to_string()]);
    }
    assert!(run(&mut cmd).status.success());
}

fn first_fixture_files(fixture: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    (
        fixture.join("images/rec-00.png"),
        fixture.join("masks/rec-00.png"),
    )
}

#[test]
fn perturb_full_confidence_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, mask) = first_fixture_files(&common::fixture_dir());
    let out = tmp.path().join("out.png");
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .arg("--mask")
        .arg(&mask)
        .args(["-c", "100", "--out"])
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let a = vcal_core::ImageTensor::load_png(&image).unwrap();
    let b = vcal_core::ImageTensor::load_png(&out).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn perturb_same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, mask) = first_fixture_files(&common::fixture_dir());
    let mut outputs = Vec::new();
    for name in ["a.png", "b.png", "c.png"] {
        let seed = if name == "c.png" { "2" } else { "1" };
        let out = tmp.path().join(name);
        let res = run(bin()
            .arg("perturb")
            .arg("--image")
            .arg(&image)
            .arg("--mask")
            .arg(&mask)
            .args(["-c", "20", "--seed", seed, "--out"])
            .arg(&out));
        assert!(res.status.success());
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0], outputs[2]);
}

#[test]
fn perturb_outside_mask_unchanged_and_inside_changed() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, mask_path) = first_fixture_files(&common::fixture_dir());
    let out = tmp.path().join("out.png");
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .arg("--mask")
        .arg(&mask_path)
        .args(["-c", "0", "--out"])
        .arg(&out));
    assert!(res.status.success());
    let a = vcal_core::ImageTensor::load_png(&image).unwrap();
    let b = vcal_core::ImageTensor::load_png(&out).unwrap();
    let mask = vcal_core::mask::load_mask(&mask_path, a.dims()).unwrap();
    let mut changed = 0;
    for r in 0..a.height() {
        for c in 0..a.width() {
            if mask.get(r, c) {
                changed += usize::from(a.pixel(r, c) != b.pixel(r, c));
            } else {
                assert_eq!(a.pixel(r, c), b.pixel(r, c));
            }
        }
    }
    assert!(changed > mask.count() / 2);
}

#[test]
fn perturb_missing_mask_file_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, _) = first_fixture_files(&common::fixture_dir());
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .args(["--mask", "/nonexistent/mask.png", "-c", "50", "--out"])
        .arg(tmp.path().join("o.png")));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "UnreadableFile");
}

#[test]
fn perturb_rejects_out_of_range_confidence() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, mask) = first_fixture_files(&common::fixture_dir());
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .arg("--mask")
        .arg(&mask)
        .args(["-c", "101", "--out"])
        .arg(tmp.path().join("o.png")));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "InvalidConfidence");
}

#[test]
fn perturb_global_mode_needs_no_mask() {
    let tmp = tempfile::tempdir().unwrap();
    let (image, _) = first_fixture_files(&common::fixture_dir());
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .args(["-c", "0", "--mode", "global", "--out"])
        .arg(tmp.path().join("o.png")));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let res = run(bin()
        .arg("perturb")
        .arg("--image")
        .arg(&image)
        .args(["-c", "0", "--out"])
        .arg(tmp.path().join("p.png")));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "InvalidConfig");
}

#[test]
fn build_dataset_three_records() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fx");
    make_fixture(&fixture, 3, None);
    let out = tmp.path().join("out");
    let res = build_dataset(&fixture, &out, 11, None);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let sft = read_lines(&out.join("sft.jsonl"));
    let simpo = read_lines(&out.join("simpo.jsonl"));
    assert_eq!(sft.len(), 3);
    assert!(simpo.len() <= 3);
    for line in &sft {
        let q = line["query"].as_str().unwrap();
        assert!(q.starts_with("A Language model was asked: Is there a "));
        assert!(q.ends_with("How certain are you about model's answer from 1%-100% ?"));
        assert!(out.join(line["image"].as_str().unwrap()).is_file());
    }
    for line in &simpo {
        assert_ne!(line["response"], "50%");
    }

    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["total_records"], 3);
    assert_eq!(report["kept"], 3);
    assert_eq!(report["dropped"], 0);
    assert_eq!(report["sft_samples"], 3);
    assert_eq!(
        report["simpo_pairs"].as_u64().unwrap() + report["degenerate_pairs"].as_u64().unwrap(),
        3
    );
    assert_eq!(
        report["simpo_pairs"].as_u64().unwrap() as usize,
        simpo.len()
    );
}

#[test]
fn build_dataset_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = common::fixture_dir();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(build_dataset(&fixture, &a, 3, None).status.success());
    assert!(build_dataset(&fixture, &b, 3, Some(2)).status.success());
    for name in ["sft.jsonl", "simpo.jsonl", "report.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    for entry in std::fs::read_dir(a.join("images")).unwrap() {
        let entry = entry.unwrap();
        assert_eq!(
            std::fs::read(entry.path()).unwrap(),
            std::fs::read(b.join("images").join(entry.file_name())).unwrap()
        );
    }
}

#[test]
fn build_dataset_counts_missing_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fx");
    make_fixture(&fixture, 4, Some(2));
    let out = tmp.path().join("out");
    let res = build_dataset(&fixture, &out, 1, None);
    assert!(res.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["total_records"], 4);
    assert_eq!(report["kept"], 3);
    assert_eq!(report["dropped"], 1);
    assert_eq!(report["missing_mask"], 1);
    assert_eq!(read_lines(&out.join("sft.jsonl")).len(), 3);
}

#[test]
fn build_dataset_uses_env_root_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("fx");
    make_fixture(&fixture, 3, None);
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 5\nconfidence_grid = [30]\n[perturbation]\nt_max = 50\n",
    )
    .unwrap();

    let out = tmp.path().join("from_config");
    let res = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("build-dataset")
        .arg("--records")
        .arg(fixture.join("records.jsonl"))
        .arg("--masks")
        .arg(fixture.join("masks.jsonl"))
        .env("VCAL_DATASET_ROOT", &fixture)
        .arg("--out")
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for line in read_lines(&out.join("sft.jsonl")) {
        assert_eq!(line["response"], "30%");
    }

    // a flag overrides the file
    let out2 = tmp.path().join("from_flag");
    let res = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("build-dataset")
        .arg("--records")
        .arg(fixture.join("records.jsonl"))
        .arg("--masks")
        .arg(fixture.join("masks.jsonl"))
        .arg("--dataset-root")
        .arg(&fixture)
        .args(["--grid", "80"])
        .arg("--out")
        .arg(&out2));
    assert!(res.status.success());
    for line in read_lines(&out2.join("simpo.jsonl")) {
        assert_eq!(line["response"], "80%");
        assert_eq!(line["rejected_response"], "20%");
    }
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "sead = 5\n").unwrap();
    let res = run(bin()
        .arg("--config")
        .arg(&config)
        .arg("losses")
        .arg("--input")
        .arg(&config));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "InvalidConfig");
}

#[test]
fn losses_reference_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("pairs.jsonl");
    std::fs::write(
        &input,
        "{\"logprob_w\":-10.0,\"len_w\":5,\"logprob_l\":-30.0,\"len_l\":10}\n\
         {\"logprob_w\":-2.0,\"len_w\":1,\"logprob_l\":-1.0,\"len_l\":1}\n",
    )
    .unwrap();
    let res = run(bin().arg("losses").arg("--input").arg(&input));
    assert!(res.status.success());
    let lines: Vec<Value> = String::from_utf8(res.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!((lines[0]["loss"].as_f64().unwrap() - 0.313262).abs() < 1e-6);
    assert!(lines[0]["grad_w"].as_f64().unwrap() < 0.0);
    assert!(lines[0]["grad_l"].as_f64().unwrap() > 0.0);
    let mean = (lines[0]["loss"].as_f64().unwrap() + lines[1]["loss"].as_f64().unwrap()) / 2.0;
    assert!((lines[2]["mean_loss"].as_f64().unwrap() - mean).abs() < 1e-15);
    assert_eq!(lines[2]["pairs"], 2);
}

#[test]
fn losses_sft_objective_and_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("sft.jsonl");
    std::fs::write(
        &input,
        "{\"logprob\":-2.0,\"length\":4}\n{\"logprob\":-1.0,\"length\":1}\n",
    )
    .unwrap();
    let res = run(bin()
        .arg("losses")
        .arg("--input")
        .arg(&input)
        .args(["--objective", "sft"]));
    assert!(res.status.success());
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["sft_loss"].as_f64().unwrap(), 1.5);

    std::fs::write(&input, "{\"logprob\":0.5,\"length\":4}\n").unwrap();
    let res = run(bin()
        .arg("losses")
        .arg("--input")
        .arg(&input)
        .args(["--objective", "sft"]));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "InvalidLogProb");
}

fn write_predictions(dir: &Path) -> std::path::PathBuf {
    let ids: Vec<String> = (0..5).map(|i| format!("q{i}")).collect();
    let path = dir.join("predictions.jsonl");
    std::fs::write(&path, common::scripted_predictions(&ids)).unwrap();
    path
}

#[test]
fn eval_matches_golden_and_bins_recompute() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = write_predictions(tmp.path());
    let out = tmp.path().join("eval");
    let res = run(bin()
        .arg("eval")
        .arg("--predictions")
        .arg(&preds)
        .arg("--out")
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    common::compare_reports(&report, &common::golden_report(), 1e-12).unwrap();

    let total: u64 = report["bin_stats"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["count"].as_u64().unwrap())
        .sum();
    let recomputed: f64 = report["bin_stats"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["count"].as_u64().unwrap() > 0)
        .map(|b| {
            let w = b["count"].as_f64().unwrap() / total as f64;
            w * (b["mean_acc"].as_f64().unwrap() - b["mean_conf"].as_f64().unwrap()).abs()
        })
        .sum();
    assert!((recomputed - report["ece"].as_f64().unwrap()).abs() < 1e-12);

    let roc = std::fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,tpr,fpr\n"));
    assert!(roc.trim_end().ends_with("1,1") || roc.trim_end().ends_with("1.0,1.0"));
    let rel = std::fs::read_to_string(out.join("reliability.csv")).unwrap();
    assert_eq!(rel.lines().count(), 11);
}

#[test]
fn eval_bins_flag_changes_ece() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = write_predictions(tmp.path());
    let out = tmp.path().join("eval");
    let res = run(bin()
        .arg("eval")
        .arg("--predictions")
        .arg(&preds)
        .args(["--bins", "2"])
        .arg("--out")
        .arg(&out));
    assert!(res.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["ece_bins"], 2);
    assert_eq!(report["bin_stats"].as_array().unwrap().len(), 2);
    assert!((report["ece"].as_f64().unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn eval_empty_log_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("empty.jsonl");
    std::fs::write(&preds, "").unwrap();
    let res = run(bin()
        .arg("eval")
        .arg("--predictions")
        .arg(&preds)
        .arg("--out")
        .arg(tmp.path().join("o")));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_error(&res)["error"], "EmptyInput");
}

#[test]
fn eval_malformed_line_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = tmp.path().join("bad.jsonl");
    std::fs::write(
        &preds,
        "{\"id\":\"a\",\"candidates\":[],\"gold\":\"yes\"}\nnot json\n",
    )
    .unwrap();
    let res = run(bin()
        .arg("eval")
        .arg("--predictions")
        .arg(&preds)
        .arg("--out")
        .arg(tmp.path().join("o")));
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_error(&res);
    assert_eq!(err["error"], "MalformedLine");
    assert!(err["message"].as_str().unwrap().contains('2'));
}

#[test]
fn curves_writes_csvs_only() {
    let tmp = tempfile::tempdir().unwrap();
    let preds = write_predictions(tmp.path());
    let out = tmp.path().join("curves");
    let res = run(bin()
        .arg("curves")
        .arg("--predictions")
        .arg(&preds)
        .arg("--out")
        .arg(&out));
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("roc.csv").is_file());
    assert!(out.join("reliability.csv").is_file());
    assert!(!out.join("report.json").exists());
}
