//! Model-ready data and the train/test partition handles.
//!
//! Resamplers and fitting routines accept a [`TrainSet`], which can only be
//! produced by a split (or by explicitly declaring that no holdout exists).
//! Evaluation rows live in a [`TestSet`] that cannot be turned back into
//! training data:
//!
//! ```compile_fail
//! use creditshap::dataset::Dataset;
//! use creditshap::resampling::{resample, ResamplingStrategy};
//! let data: Dataset = unimplemented!();
//! // A full dataset is not a training partition.
//! resample(&data, &ResamplingStrategy::default());
//! ```
//!
//! ```compile_fail
//! use creditshap::dataset::{TestSet, TrainSet};
//! let test: TestSet = unimplemented!();
//! // There is no conversion from evaluation rows to training rows.
//! let train: TrainSet = TrainSet::from(test);
//! ```

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Dense design matrix with binary labels and per-sample weights. Missing
/// values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub weights: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let weights = vec![1.0; y.len()];
        Self::with_weights(x, y, weights, feature_names)
    }

    pub fn with_weights(x: Array2<f64>, y: Vec<u8>, weights: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() || y.len() != weights.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} rows, {} labels, {} weights",
                x.nrows(),
                y.len(),
                weights.len()
            )));
        }
        if x.ncols() != feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} columns but {} feature names",
                x.ncols(),
                feature_names.len()
            )));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::InvalidData("labels must be 0 or 1".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidData("sample weights must be finite and positive".into()));
        }
        Ok(Dataset {
            x,
            y,
            weights,
            feature_names,
        })
    }

    pub fn from_matrix(matrix: &FeatureMatrix) -> Self {
        Dataset {
            x: matrix.values.clone(),
            y: matrix.labels.clone(),
            weights: vec![1.0; matrix.n_rows()],
            feature_names: matrix.columns.clone(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// `(n_good, n_bad)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let bad = self.y.iter().filter(|&&v| v == 1).count();
        (self.y.len() - bad, bad)
    }

    pub fn has_both_classes(&self) -> bool {
        let (g, b) = self.class_counts();
        g > 0 && b > 0
    }

    pub fn require_both_classes(&self, context: &str) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::SingleClass(context.to_string()))
        }
    }

    pub fn has_missing(&self) -> bool {
        self.x.iter().any(|v| v.is_nan())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            weights: rows.iter().map(|&r| self.weights[r]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn with_x(&self, x: Array2<f64>) -> Dataset {
        Dataset {
            x,
            ..self.clone()
        }
    }
}

/// Rows reserved for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet(Dataset);

/// Rows reserved for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet(Dataset);

impl TrainSet {
    pub(crate) fn new(data: Dataset) -> Self {
        TrainSet(data)
    }

    /// Declares that `data` has no holdout at all, for example when fitting a
    /// final model on every available row.
    pub fn without_holdout(data: Dataset) -> Self {
        TrainSet(data)
    }

    pub fn data(&self) -> &Dataset {
        &self.0
    }

    pub fn into_inner(self) -> Dataset {
        self.0
    }
}

impl TestSet {
    pub(crate) fn new(data: Dataset) -> Self {
        TestSet(data)
    }

    pub fn data(&self) -> &Dataset {
        &self.0
    }
}

impl std::ops::Deref for TrainSet {
    type Target = Dataset;
    fn deref(&self) -> &Dataset {
        &self.0
    }
}

impl std::ops::Deref for TestSet {
    type Target = Dataset;
    fn deref(&self) -> &Dataset {
        &self.0
    }
}
