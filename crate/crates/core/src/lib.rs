//! Explainable credit scoring.
//!
//! The crate turns raw account, client, transaction and loan-outcome tables
//! into a default-probability model and exact Shapley attributions:
//!
//! * [`ingest`] loads and joins the CSV tables and reconstructs daily balances.
//! * [`features`] builds the 106-column windowed KPI matrix.
//! * [`selection`] prunes constant, missing and correlated columns.
//! * [`resampling`] balances training partitions (SMOTE family, class weights).
//! * [`models`] trains logistic, forest, boosting, oblivious boosting and MLP models.
//! * [`explain`] computes TreeSHAP and brute-force Shapley values and plot data.
//! * [`metrics`] evaluates with ROC/AUC/Gini and stratified cross-validation.
//! * [`cli`] orchestrates the full pipeline and the experiment grid.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod resampling;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
