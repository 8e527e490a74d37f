use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[scoring]
threshold = { fixed = -1.2 }

[embedding.backend]
type = "stub"
hidden_dim = 16
num_layers = 12
mode = "signal"
layer = 8
gain = 1.0
noise_sd = 0.5

[experiment.grid]
gammas = [0.01, 0.001]
cs = [1.0, 10.0]

[experiment.protocol]
outer_k = 3
inner_k = 3

[synth]
n_subjects = 12
balance = { type = "fraction", impaired = 0.5, concordance = 0.8 }
effects = { speech_rate = 1.0, pause_length = 2.0, completion_time_shift = 4.0 }
subtest_s = 6.0
interview_s = 75.0
"#;

fn cogscreen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogscreen"))
        .current_dir(dir)
        .args(["--config", "run.toml", "--out", "out"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cogscreen(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn full_pipeline_writes_results_and_report() {
    let dir = workspace();
    let d = dir.path();
    assert!(ok(d, &["synth"]).contains("agreement 100.0 %"));
    assert!(ok(d, &["labels"]).contains("skt3       6 non-impaired / 6 impaired"));
    ok(d, &["segment"]);
    ok(d, &["extract", "--kind", "functionals"]);
    ok(d, &["extract", "--kind", "embedding"]);
    let run = ok(d, &["run", "--task", "skt3", "--kind", "functionals", "--seed", "4"]);
    assert!(run.starts_with("skt3 functionals: "));
    ok(d, &["run", "--task", "cerad1", "--kind", "embedding"]);
    assert!(ok(d, &["sweep", "--task", "skt7"]).contains("best layer 8"));

    let out = d.join("out");
    for f in ["config.json", "cohort.json", "labels.json", "labels.csv", "segments/index.json", "features/functionals.f32"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    for f in ["skt3_functionals.json", "skt3_functionals_folds.json", "skt3_functionals_models.json", "cerad1_embedding.json"] {
        assert!(out.join("runs").join(f).exists(), "{f} missing");
    }
    let result: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("runs/skt3_functionals.json")).unwrap()).unwrap();
    assert_eq!(result["seed"], 4);

    let first = ok(d, &["report"]);
    let files = ["results.txt", "results.csv", "summary.csv", "layer_curve.csv", "layer_curve.svg"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(out.join("report").join(f)).unwrap()).collect();
    let second = ok(d, &["report"]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(out.join("report").join(f)).unwrap()).collect();
    assert_eq!(first, second);
    assert_eq!(before, after);
    let table = String::from_utf8(before[0].clone()).unwrap();
    assert!(table.lines().next().unwrap().contains("skt3"));
    assert!(table.contains('\u{2014}'));
    assert_eq!(String::from_utf8(before[3].clone()).unwrap().lines().count(), 13);
}

#[test]
fn missing_prerequisite_is_a_validation_error() {
    let dir = workspace();
    let out = cogscreen(dir.path(), &["labels"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cohort.json"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = workspace();
    std::fs::write(dir.path().join("run.toml"), "[experiment.protocol]\nouter_k = 1\n").unwrap();
    assert_eq!(cogscreen(dir.path(), &["report"]).status.code(), Some(2));
}

#[test]
fn bad_manifest_exits_2() {
    let dir = workspace();
    std::fs::write(dir.path().join("manifest.json"), r#"{"subjects": [], "recordings": []}"#).unwrap();
    assert_eq!(cogscreen(dir.path(), &["ingest", "manifest.json"]).status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_2() {
    let dir = workspace();
    assert_eq!(cogscreen(dir.path(), &["run", "--task", "skt9", "--kind", "functionals"]).status.code(), Some(2));
    assert_eq!(cogscreen(dir.path(), &["extract", "--kind", "spectrogram"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = workspace();
    std::fs::write(dir.path().join("out"), "a file, not a directory").unwrap();
    assert_eq!(cogscreen(dir.path(), &["report"]).status.code(), Some(3));
}
