//! The four CLI commands as library functions: ingest, train, compare and
//! importance. All randomness derives from the run-spec seed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{overfit_check, permutation_importance, ImportanceReport, MetricPair};
use crate::features::{train_test_split, SplitPair};
use crate::ingest::{ingest_files, IngestReport, LabeledTable};
use crate::models::{EstimatorKind, ModelDocument, ParamValue, SEED};
use crate::report::{compare, ComparisonReport, EvalReport, EvalRow};
use crate::rng::derive_seed;
use crate::runspec::RunSpec;
use crate::tuning::{cv_fit, tvs_fit, TunedResult, Validator};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const TRANSFORM_FILE: &str = "transform.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const MODELS_DIR: &str = "models";

const TUNING_STREAM: u64 = 1;
const IMPORTANCE_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 3;

/// Writes via a sibling temp file and rename, so a failed run never leaves a
/// truncated output behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn snapshot_path(spec: &RunSpec) -> PathBuf {
    spec.output_dir.join(SNAPSHOT_FILE)
}

/// Ingest the spec's input files and write the snapshot plus ingest report.
pub fn cmd_ingest(spec: &RunSpec) -> Result<(LabeledTable, IngestReport)> {
    spec.check_inputs()?;
    let columns = spec.column_spec()?;
    let (labeled, report) = ingest_files(
        &spec.inputs,
        &columns,
        spec.label_policy,
        spec.max_missing_fraction,
    )?;
    write_json(&snapshot_path(spec), &labeled)?;
    write_json(&spec.output_dir.join(INGEST_REPORT_FILE), &report)?;
    Ok((labeled, report))
}

pub fn load_snapshot(path: &Path) -> Result<LabeledTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Labeled rows from the configured snapshot, or from a fresh ingest.
pub fn labeled_rows(spec: &RunSpec) -> Result<LabeledTable> {
    match &spec.snapshot {
        Some(p) => Ok(load_snapshot(p)?.filter_policy(spec.label_policy)),
        None => Ok(cmd_ingest(spec)?.0),
    }
}

/// Outer 70/30 (by default) split with the transform fitted on train rows.
pub fn outer_split(spec: &RunSpec, labeled: &LabeledTable) -> Result<SplitPair> {
    train_test_split(labeled, spec.split.ratio, spec.seed)?.encode(spec.standardize_features)
}

fn tune(
    spec: &RunSpec,
    kind: EstimatorKind,
    validator: Validator,
    split: &SplitPair,
) -> Result<TunedResult> {
    let mut grid = spec.estimators[&kind].clone();
    if !grid.0.contains_key(SEED) {
        grid.0.insert(
            SEED.to_owned(),
            vec![ParamValue::Int((derive_seed(spec.seed, MODEL_STREAM) >> 1) as i64)],
        );
    }
    let seed = derive_seed(spec.seed, TUNING_STREAM);
    match validator {
        Validator::TrainValidationSplit => {
            let ratio = spec.validators.tvs.as_ref().map_or(0.75, |t| t.inner_ratio);
            tvs_fit(kind, &grid, &split.train, ratio, seed)
        }
        Validator::CrossValidation => {
            let k = spec.validators.cv.as_ref().map_or(3, |c| c.k);
            cv_fit(kind, &grid, &split.train, k, seed)
        }
    }
}

pub fn model_file_name(kind: EstimatorKind, validator: Validator) -> String {
    format!("{MODELS_DIR}/{}_{}.json", kind.code(), validator.code())
}

fn evaluate_cell(
    spec: &RunSpec,
    kind: EstimatorKind,
    validator: Validator,
    split: &SplitPair,
) -> Result<EvalRow> {
    let tuned = tune(spec, kind, validator, split)?;
    let test = MetricPair::of_model(&tuned.best_model, &split.test)?;
    let overfit = overfit_check(
        &tuned.best_model,
        &split.train,
        &split.test,
        spec.overfit_threshold,
    )?;
    let file = model_file_name(kind, validator);
    let doc = ModelDocument::new(
        kind,
        tuned.best_params.clone(),
        split.train.feature_names().to_vec(),
        tuned.best_model,
    );
    write_atomic(&spec.output_dir.join(&file), (doc.to_json() + "\n").as_bytes())?;
    Ok(EvalRow {
        algorithm: kind,
        validator,
        error: None,
        test_r2: Some(test.r2),
        test_rmse: Some(test.rmse),
        fit_time_secs: Some(tuned.fit_time_secs),
        best_params: Some(tuned.best_params),
        grid_size: Some(tuned.grid_size),
        k_or_ratio: Some(tuned.k_or_ratio),
        overfit: Some(overfit),
        model_file: Some(file),
    })
}

/// Tunes every enabled (estimator, validator) cell, evaluates on the outer
/// test set and writes models, the transform and `report.json`.
///
/// Returns `Error::NoSuccessfulRows` (after writing the report) when every
/// cell failed.
pub fn cmd_train(spec: &RunSpec) -> Result<EvalReport> {
    let labeled = labeled_rows(spec)?;
    let split = outer_split(spec, &labeled)?;
    write_json(&spec.output_dir.join(TRANSFORM_FILE), &split.transform)?;

    let cells: Vec<(EstimatorKind, Validator)> = EstimatorKind::ALL
        .into_iter()
        .filter(|k| spec.estimators.contains_key(k))
        .flat_map(|k| spec.validators.enabled().into_iter().map(move |v| (k, v)))
        .collect();
    let rows: Vec<EvalRow> = cells
        .par_iter()
        .map(|&(kind, validator)| {
            evaluate_cell(spec, kind, validator, &split).unwrap_or_else(|e| {
                log::error!("{kind} ({validator}) failed: {e}");
                EvalRow::failed(kind, validator, e.to_string())
            })
        })
        .collect();

    let report = EvalReport {
        seed: spec.seed,
        split_ratio: spec.split.ratio,
        train_rows: split.train.n_rows(),
        test_rows: split.test.n_rows(),
        feature_names: split.train.feature_names().to_vec(),
        rows,
    };
    write_json(&spec.output_dir.join(REPORT_FILE), &report)?;
    match compare(&report.rows) {
        Ok(c) => {
            write_atomic(&spec.output_dir.join(REPORT_TEXT_FILE), c.to_text().as_bytes())?;
            Ok(report)
        }
        Err(e) => Err(e),
    }
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn cmd_compare(report_path: &Path) -> Result<ComparisonReport> {
    compare(&load_report(report_path)?.rows)
}

/// Permutation importance of a saved model on the outer test partition.
/// Writes `importance_<model>.json` and `.txt` into the output directory.
pub fn cmd_importance(model_path: &Path, spec: &RunSpec) -> Result<ImportanceReport> {
    let doc = ModelDocument::load(model_path)?;
    let labeled = labeled_rows(spec)?;
    let split = outer_split(spec, &labeled)?;
    if split.test.n_features() != doc.model.n_features() {
        return Err(Error::Shape(format!(
            "model has {} features, data has {}",
            doc.model.n_features(),
            split.test.n_features()
        )));
    }
    if split.test.feature_names() != doc.feature_names.as_slice() {
        return Err(Error::Schema("model feature names differ from the data's".into()));
    }
    let report = permutation_importance(
        &doc.model,
        &split.test,
        spec.importance_repeats,
        derive_seed(spec.seed, IMPORTANCE_STREAM),
    )?;
    let stem = model_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model");
    write_json(&spec.output_dir.join(format!("importance_{stem}.json")), &report)?;
    write_atomic(
        &spec.output_dir.join(format!("importance_{stem}.txt")),
        report.to_text().as_bytes(),
    )?;
    Ok(report)
}
