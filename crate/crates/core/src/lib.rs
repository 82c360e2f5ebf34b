//! Tabular regression toolkit for college net-price prediction.
//!
//! The pipeline runs ingest → features → split → tune → evaluate → compare:
//!
//! * [`ingest`] reads yearly scorecard CSV files into a [`ingest::RawTable`]
//!   and coalesces the public/private net-price columns into one label.
//! * [`features`] fits imputation, one-hot and standardization on training
//!   rows only and produces dense [`features::Dataset`]s.
//! * [`models`] holds the four regressors (elastic-net linear regression,
//!   decision tree, random forest, gradient-boosted trees).
//! * [`tuning`] expands parameter grids and selects hyperparameters by
//!   train-validation split or k-fold cross-validation.
//! * [`eval`] computes RMSE / R², permutation importance and the
//!   train-vs-test overfitting check.
//! * [`report`] and [`pipeline`] assemble the comparison table and drive the CLI.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod runspec;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
pub use features::Dataset;
pub use models::{EstimatorKind, FittedModel, ParamMap, ParamValue};
