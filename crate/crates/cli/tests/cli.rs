use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qent"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn qent")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_dataset(dir: &Path) {
    let o = qent(dir, &["gen-dataset", "--preset", "qutrit-warmup", "--seed", "3", "--scale", "0.01", "--out-dir", "data"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn small_model(dir: &Path) {
    small_dataset(dir);
    let o = qent(
        dir,
        &["train", "--arch", "mlp-50-20-10-5", "--data", "data/dataset.csv", "--seed", "1", "--epochs", "2", "--out-dir", "m"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gen_dataset_writes_manifest_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let manifest = fs::read_to_string(tmp.path().join("data/manifest.txt")).unwrap();
    assert!(manifest.contains("dataset.csv\t"));
    assert!(manifest.contains("dataset.csv.provenance\t"));
    let prov = fs::read_to_string(tmp.path().join("data/dataset.csv.provenance")).unwrap();
    assert!(prov.contains("seed = 3"));
    assert!(prov.contains("preset = qutrit-warmup"));
    assert!(prov.starts_with("# qent "));
}

#[test]
fn provenance_replays_to_the_same_file() {
    let tmp = tempfile::tempdir().unwrap();
    small_dataset(tmp.path());
    let o = qent(tmp.path(), &["gen-dataset", "--config", "data/dataset.csv.provenance", "--out-dir", "again"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = fs::read(tmp.path().join("data/dataset.csv")).unwrap();
    let b = fs::read(tmp.path().join("again/dataset.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn command_line_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("gen.cfg"), "# warmup\npreset = qutrit-warmup\nseed = 1\nscale = 0.01\n").unwrap();
    let o = qent(tmp.path(), &["gen-dataset", "--config", "gen.cfg", "--seed", "9", "--out-dir", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let prov = fs::read_to_string(tmp.path().join("o/dataset.csv.provenance")).unwrap();
    assert!(prov.contains("seed = 9"));
}

#[test]
fn train_writes_model_and_history() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    let hist = fs::read_to_string(tmp.path().join("m/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3);
    assert!(hist.starts_with("epoch,train_loss,val_loss"));
    assert!(tmp.path().join("m/model.txt").exists());
    assert!(tmp.path().join("m/model.txt.provenance").exists());
}

#[test]
fn missing_dataset_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qent(tmp.path(), &["train", "--arch", "cnn-k2p2", "--data", "no/such.csv", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no/such.csv"));
}

#[test]
fn missing_model_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qent(tmp.path(), &["evaluate", "--model", "gone.txt", "--preset", "gme-ghz-w"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gone.txt"));
}

#[test]
fn exit_codes_by_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    // unknown architecture: configuration
    let o = qent(tmp.path(), &["train", "--arch", "mlp-1", "--data", "data/dataset.csv", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    // missing seed for a stochastic command: configuration
    let o = qent(tmp.path(), &["gen-dataset", "--preset", "qutrit-warmup"]);
    assert_eq!(o.status.code(), Some(2));
    // 36-input model on 64-feature three-qubit states: data
    let o = qent(tmp.path(), &["evaluate", "--model", "m/model.txt", "--preset", "gme-w-wbar"]);
    assert_eq!(o.status.code(), Some(3));
    // diverging learning rate: training
    let o = qent(
        tmp.path(),
        &["train", "--arch", "mlp-50-20-10-5", "--data", "data/dataset.csv", "--seed", "1", "--epochs", "20", "--optimizer", "sgd", "--lr", "1e3", "--out-dir", "bad"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn cnn_rejects_three_qubit_data() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qent(
        tmp.path(),
        &["gen-dataset", "--preset", "three-qubit-gme", "--seed", "1", "--scale", "0.001", "--attempt-factor", "2", "--out-dir", "g"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = qent(tmp.path(), &["train", "--arch", "cnn-k2p2", "--data", "g/dataset.csv", "--seed", "1", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_preset_writes_curve_table() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    let o = qent(tmp.path(), &["evaluate", "--model", "m/model.txt", "--preset", "cglmp-eps-grid", "--out-dir", "e"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("e/predictions.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "eps,prediction,exact");
    assert_eq!(lines.len(), 202);
    let report = fs::read_to_string(tmp.path().join("e/report.txt")).unwrap();
    assert!(report.contains("mse="));
    assert!(report.contains("sqerr_five_number="));
}

#[test]
fn evaluate_on_dataset_file() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    let o = qent(tmp.path(), &["evaluate", "--model", "m/model.txt", "--data", "data/dataset.csv", "--out-dir", "e"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("e/predictions.csv")).unwrap();
    assert!(table.starts_with("index,prediction,exact"));
}

#[test]
fn empty_test_set_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    let text = fs::read_to_string(tmp.path().join("data/dataset.csv")).unwrap();
    let header: String = text
        .lines()
        .filter(|l| l.starts_with('#'))
        .map(|l| if l.starts_with("# samples=") { "# samples=0".to_string() } else { l.to_string() })
        .map(|l| l + "\n")
        .collect();
    fs::write(tmp.path().join("empty.csv"), header).unwrap();
    let o = qent(tmp.path(), &["evaluate", "--model", "m/model.txt", "--data", "empty.csv"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn nonlocality_rows_and_single_point() {
    let tmp = tempfile::tempdir().unwrap();
    small_model(tmp.path());
    let o = qent(
        tmp.path(),
        &["analyze-nonlocality", "--model", "m/model.txt", "--p-values", "0.9,0.95,1", "--gamma-values", "0.6,0.65", "--out-dir", "n"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let records = fs::read_to_string(tmp.path().join("n/records.csv")).unwrap();
    // every point here has positive coherent information
    assert_eq!(records.lines().count(), 1 + 6);
    assert!(String::from_utf8_lossy(&o.stdout).contains("pcc_sqerr_violation="));
    let o = qent(
        tmp.path(),
        &["analyze-nonlocality", "--model", "m/model.txt", "--p-values", "1", "--gamma-values", "0.6", "--out-dir", "n1"],
    );
    assert_eq!(o.status.code(), Some(3));
}
