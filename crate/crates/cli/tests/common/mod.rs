#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vcal"))
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic10")
}

pub fn golden_report() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_report.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to spawn vcal")
}

/// `build-dataset` over a fixture directory laid out by `make-fixture`.
pub fn build_dataset(fixture: &Path, out: &Path, seed: u64, threads: Option<usize>) -> Output {
    let mut cmd = bin();
    if let Some(t) = threads {
        cmd.args(["--threads", &t.to_string()]);
    }
    cmd.arg("build-dataset")
        .arg("--records")
        .arg(fixture.join("records.jsonl"))
        .arg("--masks")
        .arg(fixture.join("masks.jsonl"))
        .arg("--dataset-root")
        .arg(fixture)
        .args(["--seed", &seed.to_string()])
        .arg("--out")
        .arg(out);
    run(&mut cmd)
}

pub fn read_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn cand(answer: &str, raw: &str) -> Value {
    json!({ "answer": answer, "raw_response": raw })
}

/// Scripted model replies for the first five dataset samples.
///
/// The four scored records reproduce the hand fixture
/// confidence = [0.9, 0.9, 0.1, 0.1], correct = [1, 0, 0, 0]
/// with internal probabilities [0.8, 0.6, 0.3, 0.2]; the fifth has no
/// readable confidence.
pub fn scripted_predictions(sample_ids: &[String]) -> String {
    assert!(sample_ids.len() >= 5);
    let rows = [
        json!({
            "id": sample_ids[0],
            "candidates": [cand("yes", "Looking at the image, 90%."), cand("no", "10%")],
            "gold": "yes",
            "internal_prob": 0.8,
        }),
        json!({
            "id": sample_ids[1],
            "candidates": [cand("yes", "I'm 90% sure"), cand("no", "10 percent")],
            "gold": "No",
            "internal_prob": 0.6,
        }),
        json!({
            "id": sample_ids[2],
            "candidates": [cand("yes", "Confidence: 5"), cand("No", "10%")],
            "gold": "yes",
            "internal_prob": 0.3,
        }),
        json!({
            "id": sample_ids[3],
            "candidates": [cand("Yes", "10 %"), cand("no", "From 1%-100%, I'd put it at 8%")],
            "gold": "no",
            "internal_prob": 0.2,
        }),
        json!({
            "id": sample_ids[4],
            "candidates": [cand("yes", "definitely"), cand("no", "no idea")],
            "gold": "yes",
            "internal_prob": 0.5,
        }),
    ];
    rows.iter().map(|r| format!("{r}\n")).collect()
}

/// Compares a report against the golden one: counts exactly, reals within
/// `tol`, nulls must match.
pub fn compare_reports(got: &Value, want: &Value, tol: f64) -> Result<(), String> {
    match (got, want) {
        (Value::Object(g), Value::Object(w)) => {
            if g.len() != w.len() {
                let gk: Vec<_> = g.keys().collect();
                let wk: Vec<_> = w.keys().collect();
                return Err(format!("field sets differ: {gk:?} vs {wk:?}"));
            }
            for (k, wv) in w {
                let gv = g.get(k).ok_or_else(|| format!("missing field {k}"))?;
                compare_reports(gv, wv, tol).map_err(|e| format!("{k}: {e}"))?;
            }
            Ok(())
        }
        (Value::Array(g), Value::Array(w)) => {
            if g.len() != w.len() {
                return Err(format!("length {} vs {}", g.len(), w.len()));
            }
            for (i, (gv, wv)) in g.iter().zip(w).enumerate() {
                compare_reports(gv, wv, tol).map_err(|e| format!("[{i}]: {e}"))?;
            }
            Ok(())
        }
        (Value::Number(g), Value::Number(w)) => {
            if w.is_u64() && g.is_u64() {
                return if g == w {
                    Ok(())
                } else {
                    Err(format!("{g} vs {w}"))
                };
            }
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            if (g - w).abs() <= tol {
                Ok(())
            } else {
                Err(format!("{g} vs {w}"))
            }
        }
        (g, w) if g == w => Ok(()),
        (g, w) => Err(format!("{g} vs {w}")),
    }
}
