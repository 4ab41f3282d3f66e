//! Integration tests of the binary: exit codes per error class, stage
//! caching, report shapes, and the report subcommand.

use std::path::Path;
use std::process::Command;

use grasnid_cli::manifest::RunManifest;
use grasnid_testkit::SynthSpec;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_grasnid")
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("train.txt");
    grasnid_testkit::write_file(&path, &SynthSpec::nslkdd_train(3).scaled_down(40)).unwrap();
    path
}

fn write_config(dir: &Path, train: &Path, out: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(
        &path,
        format!(
            "dataset_kind = nslkdd\n\
             train_path = {}\n\
             out_dir = {}\n\
             cutoff_percent = 99\n\
             eval_max_rows_per_class = 400\n\
             seed = 42\n\
             {extra}",
            train.display(),
            out.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_emits_reports_and_caches_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");

    let first = Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(first.status.success(), "{first:?}");

    // distance table: 8 held-out rows, 5 category columns
    let csv = std::fs::read_to_string(out.join("infer").join("distances.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "zsc,assigned,DoS,Normal,Probe,R2L,U2R");
    assert_eq!(lines.count(), 8);

    let manifest = RunManifest::read(&out.join("run_manifest.json")).unwrap();
    assert!(manifest.stages.iter().all(|s| !s.cached));

    // unchanged config: every stage cache-hits and flags it in the manifest
    let second = Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(second.status.success(), "{second:?}");
    let manifest = RunManifest::read(&out.join("run_manifest.json")).unwrap();
    assert!(manifest.stages.iter().all(|s| s.cached));
    assert_eq!(manifest.stages.len(), 4);

    // changing a knob that only affects inference re-runs infer (and eval
    // fingerprints stay valid)
    let config2 = write_config(dir.path(), &train, &out, "engine = dense-log\n");
    let third = Command::new(binary())
        .args(["--config", config2.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(third.status.success(), "{third:?}");
    let manifest = RunManifest::read(&out.join("run_manifest.json")).unwrap();
    let by_name: std::collections::BTreeMap<_, _> = manifest
        .stages
        .iter()
        .map(|s| (s.name.as_str(), s.cached))
        .collect();
    assert!(by_name["ingest"]);
    assert!(by_name["alnid"]);
    assert!(!by_name["infer"]);
    assert!(by_name["eval"]);
}

#[test]
fn invalid_cutoff_fails_validation_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "cutoff_percent = 0\n");

    let output = Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    assert!(!out.join("ingest").exists(), "no stage may have run");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("cutoff_percent"), "{stderr}");
}

#[test]
fn missing_train_file_exits_with_the_data_class_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(
        dir.path(),
        &dir.path().join("no_such_file.txt"),
        &out,
        "",
    );
    let output = Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn malformed_data_exits_with_the_parse_class_code() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("broken.txt");
    std::fs::write(&train, "this,is,not,a,connection,record\n").unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");
    let output = Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "ingest"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{output:?}");
}

#[test]
fn env_variable_overrides_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");

    // an invalid override must be rejected, proving it was applied
    let output = Command::new(binary())
        .env("GRASNID_CUTOFF_PERCENT", "250")
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn report_subcommand_regenerates_tables() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");
    assert!(Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "run"])
        .status()
        .unwrap()
        .success());

    let csv_path = out.join("infer").join("distances.csv");
    let original = std::fs::read_to_string(&csv_path).unwrap();
    std::fs::remove_file(&csv_path).unwrap();

    assert!(Command::new(binary())
        .args(["--config", config.to_str().unwrap(), "report"])
        .status()
        .unwrap()
        .success());
    let regenerated = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(original, regenerated);
}

#[test]
fn single_distance_eval_emits_a_one_model_table() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");

    for stage in ["ingest", "alnid"] {
        assert!(Command::new(binary())
            .args(["--config", config.to_str().unwrap(), stage])
            .status()
            .unwrap()
            .success());
    }
    assert!(Command::new(binary())
        .args([
            "--config",
            config.to_str().unwrap(),
            "eval",
            "--distance",
            "frobenius",
            "--k",
            "3",
        ])
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(out.join("eval").join("knn_metrics.csv")).unwrap();
    assert!(csv.starts_with("metric,frobenius_distance\n"), "{csv}");
}

#[test]
fn dump_projectors_writes_small_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_fixture(dir.path());
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &train, &out, "");
    for stage in ["ingest", "alnid"] {
        assert!(Command::new(binary())
            .args(["--config", config.to_str().unwrap(), stage])
            .status()
            .unwrap()
            .success());
    }
    assert!(Command::new(binary())
        .args([
            "--config",
            config.to_str().unwrap(),
            "infer",
            "--dump-projectors",
        ])
        .status()
        .unwrap()
        .success());
    // every held-out class in this fixture is small enough to dump
    let projector_dir = out.join("infer").join("projectors");
    let count = std::fs::read_dir(&projector_dir).unwrap().count();
    assert_eq!(count, 8, "one projector CSV per held-out class");
}
