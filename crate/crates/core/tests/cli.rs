use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use emoedit::hed::{parse_hed_csv, parse_hed_json};

const BIN: &str = env!("CARGO_BIN_EXE_emoedit");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).env_remove("EMOEDIT_MODELS").args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn err_json(out: &Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).expect("stderr is one JSON error object")
}

/// Small corpus plus a trained bank, shared by the tests below.
fn trained() -> tempfile::TempDir {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["synth", "corpus", "--out", "c", "--speakers", "1", "--per-emotion", "3"]);
    ok(t.path(), &["train", "--manifest", "c/manifest.csv", "--out", "bank", "--seed", "3"]);
    t
}

const WAV: &str = "c/wav/spk01_happy_001.wav";
const ALIGN: &str = "c/alignment/spk01_happy_001.json";

#[test]
fn train_writes_complete_bank_and_report() {
    let t = trained();
    let report: Value = serde_json::from_slice(&std::fs::read(t.path().join("bank/training_report.json")).unwrap()).unwrap();
    assert_eq!(report["models"].as_array().unwrap().len(), 9);
    assert_eq!(report["neutral"], "Neutral");
    for e in ["Angry", "Happy", "Sad"] {
        for l in ["utterance", "word", "phoneme"] {
            assert!(t.path().join(format!("bank/{e}.{l}.json")).exists());
        }
    }
}

#[test]
fn extract_csv_to_stdout_and_json_by_extension() {
    let t = trained();
    let csv = ok(t.path(), &["extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank", "--out", "-"]);
    let m = parse_hed_csv(std::str::from_utf8(&csv).unwrap()).unwrap();
    assert_eq!(m.emotions(), ["Angry", "Happy", "Sad"]);
    ok(t.path(), &["hed", "extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank", "--out", "h.json"]);
    let j = parse_hed_json(&std::fs::read_to_string(t.path().join("h.json")).unwrap()).unwrap();
    assert_eq!(j, m);
}

#[test]
fn models_dir_from_environment() {
    let t = trained();
    let out = Command::new(BIN)
        .current_dir(t.path())
        .env("EMOEDIT_MODELS", "bank")
        .args(["extract", "--wav", WAV, "--alignment", ALIGN])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.starts_with(b"phoneme,word_index,"));
}

#[test]
fn edit_diff_and_sweep() {
    let t = trained();
    let d = t.path();
    ok(d, &["extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank", "--out", "h.csv"]);
    std::fs::write(
        d.join("s.json"),
        r#"{"ops":[{"level":"word","selector":{"word":1},"emotion":"Happy","action":"set","value":1.0}]}"#,
    )
    .unwrap();
    ok(d, &["edit", "--in", "h.csv", "--script", "s.json", "--out", "e.csv"]);
    let e = parse_hed_csv(&std::fs::read_to_string(d.join("e.csv")).unwrap()).unwrap();
    let happy = e.emotion_index("Happy").unwrap();
    assert_eq!(e.word_block(1).unwrap()[happy], 1.0);

    let script: Value = serde_json::from_slice(&ok(d, &["diff", "--from", "h.csv", "--to", "e.csv"])).unwrap();
    assert_eq!(script["ops"].as_array().unwrap().len(), 1);

    ok(d, &["sweep", "--in", "h.csv", "--level", "word", "--emotion", "Happy", "--values", "0,0.5,1", "--out-dir", "sw"]);
    for v in ["0", "0.5", "1"] {
        let m = parse_hed_csv(&std::fs::read_to_string(d.join(format!("sw/h_W_Happy_{v}.csv"))).unwrap()).unwrap();
        let want: f64 = v.parse().unwrap();
        for w in 0..m.word_count() {
            assert_eq!(m.word_block(w).unwrap()[happy], want);
        }
    }
}

#[test]
fn eval_metrics_and_trends() {
    let t = trained();
    let d = t.path();
    let same: Value = serde_json::from_slice(&ok(d, &["eval", "metrics", "--ref", WAV, "--test", WAV])).unwrap();
    assert_eq!(same["mcd_db"], 0.0);
    assert_eq!(same["frame_disturbance"], 0.0);

    let mut runs = String::from("condition,emotion,intensity,duration_s,pitch_mean_hz,pitch_std_hz,energy_mean_db,energy_std_db\n");
    for c in ["U", "W", "P", "WP"] {
        for i in 0..5 {
            let x = i as f64 / 4.0;
            runs += &format!("{c},Sad,{x},{},{},{},{},{}\n", 1.0 + x, 200.0 - 10.0 * x, 20.0 - x, -20.0 - x, 5.0 - x);
        }
    }
    std::fs::write(d.join("runs.csv"), runs).unwrap();
    let rep: Value = serde_json::from_slice(&ok(
        d,
        &["eval", "trends", "--runs", "runs.csv", "--heatmap", "heat.csv", "--grid", "grid.txt"],
    ))
    .unwrap();
    assert_eq!(rep["cells"].as_array().unwrap().len(), 20);
    assert!(rep["cells"].as_array().unwrap().iter().all(|c| c["matches"] == true));
    let heat = std::fs::read_to_string(d.join("heat.csv")).unwrap();
    assert!(heat.starts_with("emotion,feature,U,W,P,WP,expected\n"));
    assert!(std::fs::read_to_string(d.join("grid.txt")).unwrap().contains("Sad"));
}

#[test]
fn features_dump_has_label_span_and_88_values() {
    let t = trained();
    let out = ok(t.path(), &["features", "--wav", WAV, "--alignment", ALIGN, "--level", "phoneme"]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 3 + 88);
    let rows: Vec<_> = lines.collect();
    assert!(rows.len() > 5);
    assert!(rows.iter().all(|r| r.split(',').count() == 91));
}

#[test]
fn failures_report_json_on_stderr() {
    let t = tempfile::tempdir().unwrap();
    let out = run(t.path(), &["extract", "--wav", "x.wav", "--alignment", "x.json", "--models", "missing"]);
    assert_eq!(out.status.code(), Some(1));
    let e = err_json(&out);
    assert_eq!(e["error"]["module"], "hed");

    let out = run(t.path(), &["edit", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_json(&out)["error"]["code"], "cli.usage");

    std::fs::write(t.path().join("bad.csv"), "phoneme,word_index,utt_A,word_A,phon_A\nAA,0,0.5,0.5,1.5\n").unwrap();
    std::fs::write(t.path().join("s.json"), r#"{"ops":[]}"#).unwrap();
    let out = run(t.path(), &["edit", "--in", "bad.csv", "--script", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    let e = err_json(&out);
    assert_eq!(e["error"]["code"], "hed.validation");
    assert!(e["error"]["message"].as_str().unwrap().contains("phon_A"));

    let out = run(t.path(), &["--jobs", "0", "edit", "--in", "bad.csv", "--script", "s.json"]);
    assert_eq!(err_json(&out)["error"]["code"], "cli.usage");
}

#[test]
fn jobs_do_not_change_output() {
    let t = trained();
    let one = ok(t.path(), &["--jobs", "1", "extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank"]);
    let many = ok(t.path(), &["--jobs", "4", "extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank"]);
    assert_eq!(one, many);
}

#[test]
fn render_from_hed_produces_wav_and_alignment() {
    let t = trained();
    let d = t.path();
    ok(d, &["extract", "--wav", WAV, "--alignment", ALIGN, "--models", "bank", "--out", "h.csv"]);
    ok(d, &["synth", "render", "--hed", "h.csv", "--out", "r.wav", "--alignment-out", "r.json"]);
    let h = ok(d, &["extract", "--wav", "r.wav", "--alignment", "r.json", "--models", "bank"]);
    let m = parse_hed_csv(std::str::from_utf8(&h).unwrap()).unwrap();
    let orig = parse_hed_csv(&std::fs::read_to_string(d.join("h.csv")).unwrap()).unwrap();
    assert!(m.same_shape(&orig));
}
