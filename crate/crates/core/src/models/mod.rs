//! The four regressors behind one estimator contract.
//!
//! Hyperparameters travel as a [`ParamMap`] (string keys, JSON-friendly
//! values) and are resolved against per-estimator defaults by
//! [`Params::resolve`].

mod binning;
mod forest;
mod gbt;
mod linear;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;

pub use binning::{compute_bins, BinnedData, BinningSpec};
pub use forest::{fit_forest, ForestModel};
pub use gbt::{fit_gbt, GbtModel, GbtStage};
pub use linear::{fit_linear, LinearModel};
pub use tree::{fit_tree, Node, TreeModel};

pub const N_ESTIMATORS: &str = "n_estimators";
pub const MAX_DEPTH: &str = "max_depth";
pub const MAX_BINS: &str = "maxBins";
pub const MIN_INFO_GAIN: &str = "minInfoGain";
pub const MAX_ITER: &str = "maxIter";
pub const REG_PARAM: &str = "regParam";
pub const ELASTIC_NET_PARAM: &str = "elasticNetParam";
pub const STANDARDIZATION: &str = "standardization";
pub const LEARNING_RATE: &str = "learning_rate";
pub const FEATURE_SUBSET: &str = "feature_subset";
pub const BOOTSTRAP: &str = "bootstrap";
pub const SEED: &str = "seed";

pub const PARAM_KEYS: [&str; 12] = [
    N_ESTIMATORS,
    MAX_DEPTH,
    MAX_BINS,
    MIN_INFO_GAIN,
    MAX_ITER,
    REG_PARAM,
    ELASTIC_NET_PARAM,
    STANDARDIZATION,
    LEARNING_RATE,
    FEATURE_SUBSET,
    BOOTSTRAP,
    SEED,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<u64> for ParamValue {
    fn from(v: u64) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_owned())
    }
}

/// Named hyperparameter assignment. Keys absent here take estimator defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamMap(pub BTreeMap<String, ParamValue>);

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(key.to_owned(), value.into());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Into<ParamValue>) {
        self.0.insert(key.to_owned(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }
}

impl fmt::Display for ParamMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Per-node candidate feature count for forests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    All,
    OneThird,
    Sqrt,
}

impl FeatureSubset {
    pub fn count(self, n_features: usize) -> usize {
        let k = match self {
            FeatureSubset::All => n_features,
            FeatureSubset::OneThird => n_features.div_ceil(3),
            FeatureSubset::Sqrt => (n_features as f64).sqrt().ceil() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "GBT")]
    GradientBoosted,
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "LR")]
    Linear,
}

impl EstimatorKind {
    /// Report order: RF, GBT, DT, LR.
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::RandomForest,
        EstimatorKind::GradientBoosted,
        EstimatorKind::DecisionTree,
        EstimatorKind::Linear,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EstimatorKind::RandomForest => "RF",
            EstimatorKind::GradientBoosted => "GBT",
            EstimatorKind::DecisionTree => "DT",
            EstimatorKind::Linear => "LR",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            EstimatorKind::RandomForest => "Random Forest Regression",
            EstimatorKind::GradientBoosted => "Gradient Boosted Trees Regression",
            EstimatorKind::DecisionTree => "Decision Tree Regression",
            EstimatorKind::Linear => "Linear Regression",
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(code))
            .ok_or_else(|| Error::Config(format!("unknown estimator {code:?}")))
    }

    /// Fits this estimator with `params` resolved against its defaults.
    pub fn fit(self, train: &Dataset, params: &ParamMap) -> Result<FittedModel> {
        let p = Params::resolve(params, self)?;
        if train.n_rows() == 0 {
            return Err(Error::Shape("empty training set".into()));
        }
        Ok(match self {
            EstimatorKind::Linear => FittedModel::Linear(linear::fit_linear_resolved(train, &p)),
            EstimatorKind::DecisionTree => {
                let bins = compute_bins(train, p.max_bins);
                FittedModel::Tree(tree::fit_tree_resolved(train, &p, &bins, None))
            }
            EstimatorKind::RandomForest => FittedModel::Forest(forest::fit_forest_resolved(train, &p)),
            EstimatorKind::GradientBoosted => FittedModel::Gbt(gbt::fit_gbt_resolved(train, &p)),
        })
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Fully resolved hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_bins: usize,
    pub min_info_gain: f64,
    pub max_iter: usize,
    pub reg_param: f64,
    pub elastic_net_param: f64,
    pub standardization: bool,
    pub learning_rate: f64,
    pub feature_subset: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Params {
    pub fn defaults(kind: EstimatorKind) -> Self {
        Params {
            n_estimators: 20,
            max_depth: 5,
            max_bins: 32,
            min_info_gain: 0.0,
            max_iter: if kind == EstimatorKind::Linear { 100 } else { 20 },
            reg_param: 0.0,
            elastic_net_param: 0.0,
            standardization: true,
            learning_rate: 0.1,
            feature_subset: if kind == EstimatorKind::RandomForest {
                FeatureSubset::OneThird
            } else {
                FeatureSubset::All
            },
            bootstrap: true,
            seed: 42,
        }
    }

    pub fn resolve(map: &ParamMap, kind: EstimatorKind) -> Result<Self> {
        let mut p = Params::defaults(kind);
        for (key, value) in &map.0 {
            match key.as_str() {
                N_ESTIMATORS => p.n_estimators = as_count(key, value)?,
                MAX_DEPTH => p.max_depth = as_count(key, value)?,
                MAX_BINS => p.max_bins = as_count(key, value)?,
                MIN_INFO_GAIN => p.min_info_gain = as_real(key, value)?,
                MAX_ITER => p.max_iter = as_count(key, value)?,
                REG_PARAM => p.reg_param = as_real(key, value)?,
                ELASTIC_NET_PARAM => p.elastic_net_param = as_real(key, value)?,
                STANDARDIZATION => p.standardization = as_bool(key, value)?,
                LEARNING_RATE => p.learning_rate = as_real(key, value)?,
                FEATURE_SUBSET => {
                    p.feature_subset = match value {
                        ParamValue::Text(s) => match s.to_ascii_lowercase().as_str() {
                            "all" => FeatureSubset::All,
                            "onethird" => FeatureSubset::OneThird,
                            "sqrt" => FeatureSubset::Sqrt,
                            _ => return Err(Error::Param(format!("{key}: unknown subset {s:?}"))),
                        },
                        _ => return Err(Error::Param(format!("{key} must be a string"))),
                    }
                }
                BOOTSTRAP => p.bootstrap = as_bool(key, value)?,
                SEED => p.seed = as_count(key, value)? as u64,
                other => return Err(Error::Param(format!("unknown parameter {other:?}"))),
            }
        }
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Param(msg));
        if self.max_bins < 2 {
            return bad(format!("{MAX_BINS} must be >= 2, got {}", self.max_bins));
        }
        if self.max_depth < 1 {
            return bad(format!("{MAX_DEPTH} must be >= 1"));
        }
        if self.n_estimators < 1 {
            return bad(format!("{N_ESTIMATORS} must be >= 1"));
        }
        if self.min_info_gain.is_nan() || self.min_info_gain < 0.0 {
            return bad(format!("{MIN_INFO_GAIN} must be >= 0"));
        }
        if !(self.reg_param >= 0.0 && self.reg_param.is_finite()) {
            return bad(format!("{REG_PARAM} must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.elastic_net_param) {
            return bad(format!("{ELASTIC_NET_PARAM} must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("{LEARNING_RATE} must lie in (0, 1]"));
        }
        Ok(())
    }
}

fn as_count(key: &str, v: &ParamValue) -> Result<usize> {
    match v {
        ParamValue::Int(i) if *i >= 0 => Ok(*i as usize),
        ParamValue::Float(x) if *x >= 0.0 && x.fract() == 0.0 && *x < 1e15 => Ok(*x as usize),
        _ => Err(Error::Param(format!("{key} must be a non-negative integer, got {v}"))),
    }
}

fn as_real(key: &str, v: &ParamValue) -> Result<f64> {
    match v {
        ParamValue::Int(i) => Ok(*i as f64),
        ParamValue::Float(x) => Ok(*x),
        _ => Err(Error::Param(format!("{key} must be a number, got {v}"))),
    }
}

fn as_bool(key: &str, v: &ParamValue) -> Result<bool> {
    match v {
        ParamValue::Bool(b) => Ok(*b),
        _ => Err(Error::Param(format!("{key} must be a boolean, got {v}"))),
    }
}

/// Trained predictor. Immutable; `predict` is reentrant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Linear(m) => m.weights.len(),
            FittedModel::Tree(m) => m.n_features(),
            FittedModel::Forest(m) => m.n_features(),
            FittedModel::Gbt(m) => m.n_features(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, row has {}",
                self.n_features(),
                row.len()
            )));
        }
        Ok(self.predict_unchecked(row))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(m) => m.predict_row(row),
            FittedModel::Tree(m) => m.predict_row(row),
            FittedModel::Forest(m) => m.predict_row(row),
            FittedModel::Gbt(m) => m.predict_row(row),
        }
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.n_features() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, dataset has {}",
                self.n_features(),
                data.n_features()
            )));
        }
        Ok(data.rows().map(|r| self.predict_unchecked(r)).collect())
    }
}

pub const MODEL_FORMAT: &str = "netprice-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Self-describing persisted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub estimator: EstimatorKind,
    pub params: ParamMap,
    pub feature_names: Vec<String>,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(
        estimator: EstimatorKind,
        params: ParamMap,
        feature_names: Vec<String>,
        model: FittedModel,
    ) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_FORMAT_VERSION,
            estimator,
            params,
            feature_names,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::json("model document", e))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.feature_names.len() != doc.model.n_features() {
            return Err(Error::Schema("feature_names length disagrees with model width".into()));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
