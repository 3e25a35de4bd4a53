use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn codabank(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codabank"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn synth_file(dir: &Path) {
    let out = codabank(
        &[
            "synth", "--seed", "3", "--n", "1200", "--rate", "0.1", "--signal", "RE/NCL=3", "--out", "data.csv",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_zero_rows_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = codabank(&["synth", "--seed", "1", "--n", "0", "--out", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("id,year,NCA,CA,RE,NCL,CL,OR,OE,bankrupt"));
}

#[test]
fn validate_plr_accepts_default_and_rejects_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let ok = codabank(&["validate-plr"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("valid spanning tree"));

    let listed = codabank(
        &["validate-plr", "--edges", "NCA/CA,OR/CA,OR/OE,CA/CL,NCL/CL,RE/NCL"],
        dir.path(),
    );
    assert_eq!(listed.status.code(), Some(0));

    let bad = codabank(
        &["validate-plr", "--edges", "NCA/CA,CA/RE,RE/NCL,NCL/CL,CL/OR,OR/NCA"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cycle"));
}

#[test]
fn run_writes_table_artifacts_and_reproducible_report() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path());
    let args = [
        "run",
        "--input",
        "data.csv",
        "--seed",
        "42",
        "--train-fraction",
        "0.7",
        "--methods",
        "all",
        "--features",
        "both",
        "--trees",
        "40",
        "--out",
        "results",
    ];
    let first = codabank(&args, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let results = dir.path().join("results");
    let table = fs::read_to_string(results.join("metrics.txt")).unwrap();
    let rows = table.lines().filter(|l| l.contains(" %")).count();
    assert_eq!(rows, 6, "{table}");
    for name in [
        "report.json",
        "rejections.txt",
        "features_standard.csv",
        "features_compositional.csv",
        "coefficients_logit_compositional.tsv",
        "knn_tuning_knn_standard.csv",
        "importance_rf_compositional.csv",
        "model_rf_standard.json",
    ] {
        assert!(results.join(name).exists(), "{name}");
    }
    let report = fs::read(results.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(json["config"]["n_trees"], 40);
    assert_eq!(json["config"]["threshold"], 0.5);
    assert_eq!(json["result"]["cells"].as_array().unwrap().len(), 6);

    let second = codabank(&args, dir.path());
    assert!(second.status.success());
    assert_eq!(fs::read(results.join("report.json")).unwrap(), report);
}

#[test]
fn restricted_run_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path());
    let out = codabank(
        &[
            "run",
            "--input",
            "data.csv",
            "--seed",
            "1",
            "--methods",
            "logit",
            "--features",
            "compositional",
            "--out",
            "r",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains(" %")).count(), 1);
    assert!(stdout.contains("Logistic regression (compositional)"));
}

#[test]
fn diagnose_reports_both_families() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path());
    let out = codabank(&["diagnose", "--input", "data.csv", "--out", "diag"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("CA/CL"));
    assert!(stdout.contains("log(RE/NCL)"));
    assert!(stdout.contains("IQR outliers"));
    let tsv = fs::read_to_string(dir.path().join("diag/diagnostics.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 10 + 21);
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path());
    let missing_flag = codabank(&["run", "--input", "data.csv", "--out", "x"], dir.path());
    assert_eq!(missing_flag.status.code(), Some(2));
    let bad_fraction = codabank(
        &[
            "run",
            "--input",
            "data.csv",
            "--seed",
            "1",
            "--train-fraction",
            "1.5",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(bad_fraction.status.code(), Some(2));
    let missing_file = codabank(&["run", "--input", "nope.csv", "--seed", "1", "--out", "x"], dir.path());
    assert_eq!(missing_file.status.code(), Some(3));
    let unknown = codabank(&["run", "--bogus"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    fs::write(
        dir.path().join("one.csv"),
        "id,year,NCA,CA,RE,NCL,CL,OR,OE,bankrupt\na,2020,1,2,3,4,5,6,7,1\n",
    )
    .unwrap();
    let too_small = codabank(&["run", "--input", "one.csv", "--seed", "1", "--out", "x"], dir.path());
    assert_eq!(too_small.status.code(), Some(3));
}
