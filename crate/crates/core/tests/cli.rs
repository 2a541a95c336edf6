//! End-to-end tests of the command-line binary: exit codes, file outputs,
//! atomicity on failure, and re-ingestion of emitted score tables.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_redundancy-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_eagle_fixture_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        "--scores",
        "eagle",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "all",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in [
        "cur_ig.md",
        "cur_ig.csv",
        "degradation.md",
        "degradation.csv",
        "extremes.csv",
        "distribution.csv",
        "distribution.svg",
        "cur_rules.csv",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
    let cur = std::fs::read_to_string(dir.path().join("cur_ig.csv")).unwrap();
    // computed from the fixture at printed resolution; each cell sits within
    // one ULP of the published row "1.39 1.94 0.19 10.08 0.58 | 9.89"
    assert_eq!(
        cur.lines().nth(1).unwrap(),
        "General,5,1.38,1.94,0.18,10.09,0.58,9.91"
    );
    let deg = std::fs::read_to_string(dir.path().join("degradation.md")).unwrap();
    assert!(deg.contains("| 1 | 68.76 (-2.83%)"), "{deg}");
    // no temp files left behind
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        assert!(!name.ends_with(".tmp"), "leftover temp file {name}");
    }
}

#[test]
fn analyze_cambrian_reports_redundancy_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        "--scores",
        "cambrian",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "md",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("RAISED"), "{text}");
    assert!(text.contains("65.28") && text.contains("63.02"), "{text}");
    assert!(dir.path().join("cur_ig.md").exists());
    assert!(!dir.path().join("cur_ig.csv").exists());
}

#[test]
fn analyze_accepts_fixture_paths_and_scheme_files() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        "--scores",
        manifest.join("fixtures/eagle_x5_7b.csv").to_str().unwrap(),
        "--categories",
        manifest
            .join("fixtures/categories_default.csv")
            .to_str()
            .unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_inputs_exit_2_and_leave_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let out = run(&[
        "analyze",
        "--scores",
        "eagle",
        "--categories",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "failed run must not leave partial output");
}

#[test]
fn malformed_scores_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "not a score table\n").unwrap();
    let out = run(&[
        "analyze",
        "--scores",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version line"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["analyze", "--scores"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["analyze", "--scores", "eagle", "--out", "/tmp/x", "--format", "pdf"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn help_exits_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn selftest_passes_on_a_fresh_checkout() {
    let out = run(&["selftest"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("[PASS] grad-check sequence_append"), "{text}");
    assert!(text.contains("[PASS] grad-check detects corruption"), "{text}");
    assert!(text.contains("[PASS] fixture round-trip eagle"), "{text}");
    assert!(text.contains("[PASS] brute-force oracle equivalence"), "{text}");
    assert!(!text.contains("[FAIL]"), "{text}");
}

#[test]
fn selftest_grad_tolerance_override_fails_as_designed() {
    let out = run(&["selftest", "--grad-tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("[FAIL] grad-check"));
}

#[test]
fn selftest_names_a_corrupted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corrupt.csv");
    // duplicate row makes the table unloadable
    std::fs::write(
        &path,
        "# redundancy-lab v1\n# encoders: A;B\n# granularity: per-category\n\
         model,masked_encoders,benchmark,score\nm,-,General,1.0\nm,-,General,2.0\n",
    )
    .unwrap();
    let out = run(&["selftest", "--fixture", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(
        text.contains("[FAIL] fixture round-trip") && text.contains("corrupt.csv"),
        "{text}"
    );
}

#[test]
fn simulate_outputs_reingest_through_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        r#"
name = "reingest-probe"
seed = 3

[world]
channels = 4

[[world.tasks]]
name = "t"
category = "Knowledge"
channels = [0, 1]
classes = 2

[[encoders]]
name = "a"
channels = [0, 1, 2, 3]
tokens = 2
dim = 4

[[encoders]]
name = "b"
channels = [0, 1]
tokens = 2
dim = 4

[fusion]
strategy = "shared_mlp"
dim = 6

[head]
hidden = [8]
classes = 2

[train]
steps = 100

[eval]
samples = 128
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let scores = out_dir.join("scores.csv");
    let table = redundancy_lab::ingest::load_score_table_auto(&scores).unwrap();
    assert_eq!(table.model_name, "reingest-probe");
    assert_eq!(table.subsets().len(), 4);
    assert_eq!(table.benchmarks(), vec!["t".to_string()]);

    // the emitted table analyzes cleanly through the same engine
    let analyze_dir = dir.path().join("analysis");
    let out = run(&[
        "analyze",
        "--scores",
        scores.to_str().unwrap(),
        "--out",
        analyze_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "per-benchmark tables need a scheme");

    // a matching scheme file makes it pass
    let scheme = dir.path().join("scheme.csv");
    std::fs::write(
        &scheme,
        "# redundancy-lab v1\nbenchmark,category,divisor\nt,Knowledge,1\n",
    )
    .unwrap();
    let out = run(&[
        "analyze",
        "--scores",
        scores.to_str().unwrap(),
        "--categories",
        scheme.to_str().unwrap(),
        "--out",
        analyze_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let curve = std::fs::read_to_string(out_dir.join("loss_curve.csv")).unwrap();
    assert!(curve.starts_with("step,loss\n0,"));
    assert_eq!(curve.lines().count(), 1 + 100);
}

#[test]
fn seed_override_changes_simulate_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = manifest.join("configs/clone.toml");
    let mut tables = Vec::new();
    for (i, seed) in [None, Some("123")].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("out{i}"));
        let mut args = vec![
            "simulate".to_string(),
            "--config".into(),
            config.to_str().unwrap().into(),
            "--out".into(),
            out_dir.to_str().unwrap().into(),
            "--format".into(),
            "csv".into(),
        ];
        if let Some(seed) = seed {
            args.push("--seed".into());
            args.push(seed.into());
        }
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        tables.push(std::fs::read_to_string(out_dir.join("scores.csv")).unwrap());
    }
    assert_ne!(tables[0], tables[1]);
}
