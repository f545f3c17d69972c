use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use selfcare_core::dataset::synth::{wrist_stress_scenario, ProtocolPlan};
use selfcare_core::dataset::{generate_synthetic, SubjectRecord, MANIFEST_FILE};
use selfcare_core::types::protocol;

fn selfcare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfcare")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_store(dir: &Path, subjects: usize) -> PathBuf {
    let store = dir.join("store");
    let out = selfcare(&["synth", "--subjects", &subjects.to_string(), "--protocol", "short", "--seed", "5", "--out", p(&store)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    store
}

/// Writes `seconds` of every channel of `record` starting at `start_s` in the
/// segment file format, leaving out `skip`.
fn write_segment(path: &Path, record: &SubjectRecord, start_s: f64, seconds: f64, skip: &[&str]) {
    let mut f = fs::File::create(path).unwrap();
    writeln!(f, "# modality,rate_hz,samples...").unwrap();
    for (m, c) in &record.channels {
        if skip.contains(&m.name()) {
            continue;
        }
        let a = (start_s * c.rate_hz) as usize;
        let b = a + (seconds * c.rate_hz) as usize;
        let samples: Vec<String> = c.samples[a..b].iter().map(|v| v.to_string()).collect();
        writeln!(f, "{},{},{}", m.name(), c.rate_hz, samples.join(",")).unwrap();
    }
}

#[test]
fn validate_reports_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 2);
    let out = selfcare(&["validate", "--dataset", p(&store)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("2 subjects"));
    assert!(stdout(&out).contains("BVP@64Hz"));
}

#[test]
fn validate_missing_manifest_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfcare(&["validate", "--dataset", p(dir.path())]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn validate_truncated_channel_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(store.join(MANIFEST_FILE)).unwrap()).unwrap();
    let file = manifest["subjects"][1]["devices"][0]["channels"][3]["file"].as_str().unwrap().to_string();
    let path = store.join(&file);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 40]).unwrap();
    let out = selfcare(&["validate", "--dataset", p(&store)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let modality = manifest["subjects"][1]["devices"][0]["channels"][3]["modality"].as_str().unwrap();
    assert!(stderr(&out).contains(modality), "{}", stderr(&out));
}

#[test]
fn eval_is_reproducible_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 3);
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = selfcare(&[
            "eval", "--dataset", p(&store), "--device", "wrist", "--task", "3", "--fusion", "kalman", "--seed", "7",
            "--out", p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(out_dir.join("table.txt").is_file());
        assert!(out_dir.join("predictions.csv").is_file());
        reports.push(fs::read_to_string(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let json: serde_json::Value = serde_json::from_str(&reports[0]).unwrap();
    assert_eq!(json["aggregate"]["folds"].as_array().unwrap().len(), 3);
    assert!(json.get("runtime_s").is_none());
}

#[test]
fn benchmark_writes_one_row_per_branch() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 2);
    let out_dir = dir.path().join("bench");
    let out = selfcare(&[
        "benchmark", "--dataset", p(&store), "--device", "wrist", "--task", "2", "--branches", "WB1,WB3",
        "--families", "DT,LDA", "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("WB1=") && table.contains("WB3="), "{table}");
    assert!(table.contains("DT F1") && table.contains("LDA Acc"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("benchmark.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn config_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 2);
    let out_dir = dir.path().join("x");
    let out = selfcare(&[
        "eval", "--dataset", p(&store), "--device", "wrist", "--task", "3", "--delta", "1.5", "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));

    let cfg = dir.path().join("chest.cfg");
    fs::write(&cfg, selfcare_core::config::FUSION_CHEST_3).unwrap();
    let out = selfcare(&[
        "eval", "--dataset", p(&store), "--device", "wrist", "--task", "3", "--config", p(&cfg), "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn extract_writes_feature_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 2);
    let out_dir = dir.path().join("features");
    let out = selfcare(&["extract", "--dataset", p(&store), "--device", "wrist", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("S1-wrist.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("subject_id,index,label,"), "{header}");
    assert!(text.lines().count() > 10);
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let store = synth_store(dir.path(), 4);
    let bundle = dir.path().join("model").join("wrist2.scbn");
    let out = selfcare(&["train", "--dataset", p(&store), "--device", "wrist", "--task", "2", "--seed", "3", "--out", p(&bundle)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // A subject the bundle never saw; stress runs last in the short protocol.
    let plan = ProtocolPlan::short();
    let record = generate_synthetic(&wrist_stress_scenario("H", plan, 900), 901).unwrap();
    let stress_start = 2.0 * plan.gap_s + plan.baseline_s + plan.amusement_s + plan.gap_s;
    let mid = stress_start + plan.stress_s / 2.0;
    let at = |t: f64| record.labels[(t * record.label_rate_hz) as usize];
    assert_eq!(at(mid - 30.0), protocol::STRESS);
    assert_eq!(at(mid + 29.0), protocol::STRESS);

    let segment = dir.path().join("stress.csv");
    write_segment(&segment, &record, mid - 30.0, 60.0, &[]);
    let out = selfcare(&["predict", "--model", p(&bundle), "--segment", p(&segment), "--fusion", "soft"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().next().unwrap() == "class stress", "{text}");
    assert!(text.contains("branches ") && text.contains("gate "), "{text}");

    let partial = dir.path().join("no-bvp.csv");
    write_segment(&partial, &record, mid - 30.0, 60.0, &["BVP"]);
    let out = selfcare(&["predict", "--model", p(&bundle), "--segment", p(&partial)]);
    assert_eq!(code(&out), 2, "{}", stdout(&out));
    assert!(stderr(&out).contains("BVP"), "{}", stderr(&out));

    let garbled = dir.path().join("bad.csv");
    fs::write(&garbled, "BVP,64\n").unwrap();
    let out = selfcare(&["predict", "--model", p(&bundle), "--segment", p(&garbled)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&selfcare(&["eval", "--device", "wrist"])), 2);
    assert_eq!(code(&selfcare(&["validate", "--dataset"])), 2);
}
