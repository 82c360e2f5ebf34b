use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netprice::features::train_test_split;
use netprice::ingest::{CellValue, LabelPolicy};
use netprice::pipeline::{self, MODELS_DIR, REPORT_FILE, SNAPSHOT_FILE};
use netprice::report::EvalReport;
use netprice::runspec::RunSpec;
use netprice::synth::{self, SynthConfig};
use serde_json::json;

const HEADER: &str = "UNITID,CONTROL,COSTT4_A,TUITIONFEE_IN,TUITIONFEE_OUT,NPT4_PUB,NPT4_PRIV";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn spec_file(dir: &Path, body: serde_json::Value) -> PathBuf {
    write(dir, "run.json", &serde_json::to_string_pretty(&body).unwrap())
}

fn tiny_inputs(dir: &Path) -> serde_json::Value {
    write(
        dir,
        "a.csv",
        &format!("{HEADER}\n1,1,20000,5000,15000,9000,NULL\n2,2,40000,30000,30000,NULL,21000\n3,3,30000,25000,25000,NULL,NULL\n"),
    );
    write(
        dir,
        "b.csv",
        &format!("{HEADER}\n4,3,35000,28000,28000,PrivacySuppressed,17500\n"),
    );
    json!([{"path": "a.csv", "year": 2015}, {"path": "b.csv", "year": 2016}])
}

fn synth_inputs(dir: &Path, rows: usize) -> serde_json::Value {
    let cfg = SynthConfig {
        rows,
        ..Default::default()
    };
    let files = synth::write_files(&dir.join("data"), &cfg).unwrap();
    json!(files
        .iter()
        .map(|f| json!({"path": f.path, "year": f.year}))
        .collect::<Vec<_>>())
}

fn netprice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netprice"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn ingest_concatenates_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = tiny_inputs(dir.path());
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "estimators": {"LR": {}},
               "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let spec = RunSpec::load(&path).unwrap();
    let (labeled, report) = pipeline::cmd_ingest(&spec).unwrap();
    assert_eq!(report.rows_read, 4);
    assert_eq!(report.rows_dropped_no_label, 1);
    assert_eq!(labeled.label, vec![9000.0, 21000.0, 17500.0]);
    let year = labeled.table.column("YEAR").unwrap();
    assert_eq!(
        year.cells,
        vec![CellValue::Numeric(2015.0), CellValue::Numeric(2015.0), CellValue::Numeric(2016.0)]
    );
    assert!(dir.path().join("out").join(SNAPSHOT_FILE).is_file());
}

#[test]
fn public_only_policy_keeps_public_labels() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = tiny_inputs(dir.path());
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "label_policy": "public_only",
               "estimators": {"LR": {}}, "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let spec = RunSpec::load(&path).unwrap();
    let (labeled, _) = pipeline::cmd_ingest(&spec).unwrap();
    assert_eq!(spec.label_policy, LabelPolicy::PublicOnly);
    assert_eq!(labeled.label, vec![9000.0]);
}

#[test]
fn missing_input_exits_2_without_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": [{"path": "nope.csv", "year": 2015}],
               "estimators": {"LR": {}}, "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let out = netprice(&["ingest", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!dir.path().join("out").join(SNAPSHOT_FILE).exists());
}

#[test]
fn ragged_row_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", &format!("{HEADER}\n1,1,20000,5000,15000,9000\n"));
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": [{"path": "a.csv", "year": 2015}],
               "estimators": {"LR": {}}, "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let out = netprice(&["ingest", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_cell_train_writes_one_model_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(dir.path(), 200);
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "estimators": {"LR": {"regParam": [0.0, 0.1]}},
               "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let out = netprice(&["train", "--spec", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(out_dir.join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.train_rows, 140);
    assert_eq!(report.test_rows, 60);
    let models: Vec<_> = fs::read_dir(out_dir.join(MODELS_DIR)).unwrap().collect();
    assert_eq!(models.len(), 1);
    assert!(out_dir.join(MODELS_DIR).join("LR_TVS.json").is_file());
}

#[test]
fn full_matrix_compare_and_importance() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(dir.path(), 400);
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs,
               "estimators": {"RF": {"n_estimators": [5]}, "GBT": {"maxIter": [5]},
                              "DT": {"max_depth": [3, 5]}, "LR": {}},
               "validators": {"tvs": {}, "cv": {"k": 3}}, "output_dir": "out",
               "importance_repeats": 2}),
    );
    let spec_arg = path.to_str().unwrap();
    let out = netprice(&["--jobs", "2", "train", "--spec", spec_arg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let report = pipeline::load_report(&out_dir.join(REPORT_FILE)).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert!(report.rows.iter().all(|r| r.succeeded()));

    let cmp = netprice(&["compare", "--in", out_dir.join(REPORT_FILE).to_str().unwrap(), "--text"]);
    assert!(cmp.status.success());
    let text = String::from_utf8_lossy(&cmp.stdout);
    assert!(text.contains("Random Forest"));
    assert!(text.contains("Lowest RMSE"));

    let model = out_dir.join(MODELS_DIR).join("GBT_CV.json");
    let imp = netprice(&["importance", "--model", model.to_str().unwrap(), "--spec", spec_arg]);
    assert!(imp.status.success(), "{}", String::from_utf8_lossy(&imp.stderr));
    assert!(out_dir.join("importance_GBT_CV.json").is_file());
    assert!(String::from_utf8_lossy(&imp.stdout).contains("COSTT4_A"));
}

#[test]
fn all_cells_failing_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(dir.path(), 100);
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "estimators": {"LR": {"regParam": [-1.0]}},
               "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let out = netprice(&["train", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report = pipeline::load_report(&dir.path().join("out").join(REPORT_FILE)).unwrap();
    assert!(report.rows[0].error.is_some());
    let cmp = netprice(&["compare", "--in", dir.path().join("out").join(REPORT_FILE).to_str().unwrap()]);
    assert_eq!(cmp.status.code(), Some(3));
}

#[test]
fn test_rows_do_not_influence_the_fitted_transform() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(dir.path(), 300);
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "estimators": {"LR": {}},
               "validators": {"tvs": {}}, "output_dir": "out", "standardize_features": true}),
    );
    let spec = RunSpec::load(&path).unwrap();
    let (labeled, _) = pipeline::cmd_ingest(&spec).unwrap();
    let split = train_test_split(&labeled, 0.7, 42).unwrap();
    let clean = split.encode(true).unwrap();

    let mut poisoned = split.clone();
    for col in &mut poisoned.test.table.columns {
        for cell in &mut col.cells {
            match cell {
                CellValue::Numeric(v) => *v *= 1e6,
                CellValue::Text(t) => *t = "unseen".into(),
                CellValue::Missing { .. } => {}
            }
        }
    }
    for y in &mut poisoned.test.label {
        *y = -1.0;
    }
    let dirty = poisoned.encode(true).unwrap();
    assert_eq!(clean.transform, dirty.transform);
    assert_eq!(clean.train, dirty.train);
    let fit = |s: &netprice::features::SplitPair| {
        netprice::EstimatorKind::Linear
            .fit(&s.train, &netprice::ParamMap::new())
            .unwrap()
    };
    assert_eq!(fit(&clean), fit(&dirty));
}

#[test]
fn seed_flag_overrides_spec_seed() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(dir.path(), 150);
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": inputs, "estimators": {"DT": {}},
               "validators": {"tvs": {}}, "output_dir": "out"}),
    );
    let out = netprice(&["--seed", "7", "train", "--spec", path.to_str().unwrap()]);
    assert!(out.status.success());
    let report = pipeline::load_report(&dir.path().join("out").join(REPORT_FILE)).unwrap();
    assert_eq!(report.seed, 7);
}

#[test]
fn unknown_spec_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = spec_file(
        dir.path(),
        json!({"spec_version": 1, "inputs": [], "estimators": {"LR": {}},
               "validators": {"tvs": {}}, "output_dir": "out", "sed": 1}),
    );
    let out = netprice(&["train", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
