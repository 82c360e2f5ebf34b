//! Declarative run configuration (`spec_version` 1).
//!
//! ```json
//! {
//!   "spec_version": 1,
//!   "inputs": [{"path": "data/MERGED2015_16_PP.csv", "year": 2015}],
//!   "column_spec": "columns.json",
//!   "label_policy": "combined",
//!   "seed": 42,
//!   "split": {"ratio": 0.7},
//!   "estimators": {"RF": {"n_estimators": [20, 50], "max_depth": [5, 10]}},
//!   "validators": {"tvs": {"inner_ratio": 0.75}, "cv": {"k": 3}},
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the spec file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ColumnSpec, LabelPolicy, YearFile};
use crate::models::EstimatorKind;
use crate::tuning::{ParamGrid, Validator};

pub const SPEC_VERSION: u32 = 1;

fn default_seed() -> u64 {
    42
}

fn default_ratio() -> f64 {
    0.7
}

fn default_inner_ratio() -> f64 {
    0.75
}

fn default_k() -> usize {
    3
}

fn default_repeats() -> usize {
    5
}

fn default_overfit() -> f64 {
    0.05
}

fn default_missing() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratio: default_ratio(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvsSpec {
    #[serde(default = "default_inner_ratio")]
    pub inner_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorSpec {
    #[serde(default)]
    pub tvs: Option<TvsSpec>,
    #[serde(default)]
    pub cv: Option<CvSpec>,
}

impl ValidatorSpec {
    pub fn enabled(&self) -> Vec<Validator> {
        let mut v = Vec::new();
        if self.tvs.is_some() {
            v.push(Validator::TrainValidationSplit);
        }
        if self.cv.is_some() {
            v.push(Validator::CrossValidation);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub spec_version: u32,
    #[serde(default)]
    pub inputs: Vec<YearFile>,
    /// Previously written snapshot; when set, `train` and `importance`
    /// skip ingestion.
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    /// Column-spec file; the built-in default set is used when absent.
    #[serde(default)]
    pub column_spec: Option<PathBuf>,
    #[serde(default)]
    pub label_policy: LabelPolicy,
    #[serde(default = "default_missing")]
    pub max_missing_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub standardize_features: bool,
    pub estimators: BTreeMap<EstimatorKind, ParamGrid>,
    pub validators: ValidatorSpec,
    pub output_dir: PathBuf,
    #[serde(default = "default_repeats")]
    pub importance_repeats: usize,
    #[serde(default = "default_overfit")]
    pub overfit_threshold: f64,
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: RunSpec =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve_paths(base);
        spec.validate()?;
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for f in &mut self.inputs {
            fix(&mut f.path);
        }
        if let Some(p) = self.snapshot.as_mut() {
            fix(p);
        }
        if let Some(p) = self.column_spec.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    /// Structural checks; input-path existence is checked by
    /// [`RunSpec::check_inputs`] when ingestion actually runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.spec_version != SPEC_VERSION {
            return bad(format!(
                "spec_version {} unsupported (expected {SPEC_VERSION})",
                self.spec_version
            ));
        }
        if self.estimators.is_empty() {
            return bad("no estimators enabled".into());
        }
        if self.validators.enabled().is_empty() {
            return bad("no validators enabled".into());
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split ratio {} not in (0, 1)", self.split.ratio));
        }
        if let Some(t) = &self.validators.tvs {
            if !(t.inner_ratio > 0.0 && t.inner_ratio < 1.0) {
                return bad(format!("inner_ratio {} not in (0, 1)", t.inner_ratio));
            }
        }
        if let Some(c) = &self.validators.cv {
            if c.k < 2 {
                return bad(format!("cv k must be >= 2, got {}", c.k));
            }
        }
        if self.importance_repeats == 0 {
            return bad("importance_repeats must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return bad("max_missing_fraction must lie in [0, 1]".into());
        }
        if self.inputs.is_empty() && self.snapshot.is_none() {
            return bad("neither inputs nor snapshot given".into());
        }
        if let Some(p) = &self.column_spec {
            if !p.exists() {
                return bad(format!("column spec {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.snapshot {
            if !p.exists() {
                return bad(format!("snapshot {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn check_inputs(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::Config("no input files".into()));
        }
        for f in &self.inputs {
            if !f.path.is_file() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    f.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn column_spec(&self) -> Result<ColumnSpec> {
        match &self.column_spec {
            Some(p) => ColumnSpec::load(p),
            None => Ok(ColumnSpec::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "spec_version": 1,
            "inputs": [{"path": "a.csv", "year": 2015}],
            "estimators": {"LR": {"regParam": [0.0, 0.1]}},
            "validators": {"tvs": {}},
            "output_dir": "out"
        }"#
    }

    #[test]
    fn defaults_and_path_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, minimal()).unwrap();
        let spec = RunSpec::load(&path).unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.split.ratio, 0.7);
        assert_eq!(spec.validators.tvs.as_ref().unwrap().inner_ratio, 0.75);
        assert_eq!(spec.validators.enabled(), vec![Validator::TrainValidationSplit]);
        assert_eq!(spec.inputs[0].path, dir.path().join("a.csv"));
        assert_eq!(spec.output_dir, dir.path().join("out"));
        assert_eq!(spec.label_policy, LabelPolicy::Combined);
        assert!(spec.check_inputs().is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let base: serde_json::Value = serde_json::from_str(minimal()).unwrap();
        let cases = [
            ("spec_version", serde_json::json!(2)),
            ("estimators", serde_json::json!({})),
            ("validators", serde_json::json!({})),
            ("split", serde_json::json!({"ratio": 1.0})),
            ("validators", serde_json::json!({"cv": {"k": 1}})),
        ];
        for (key, value) in cases {
            let mut v = base.clone();
            v[key] = value;
            let spec: RunSpec = serde_json::from_value(v).unwrap();
            assert!(matches!(spec.validate(), Err(Error::Config(_))), "{key}");
        }
        let mut v = base.clone();
        v["estimators"] = serde_json::json!({"SVM": {}});
        assert!(serde_json::from_value::<RunSpec>(v).is_err());
    }
}
