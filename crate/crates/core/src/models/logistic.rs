//! Logistic regression fitted by damped Newton iterations, and the
//! equal-frequency dummy coding used by its binned variant.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{clamp_probability, sigmoid};
use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};
use crate::features::Imputer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    /// Ridge penalty on the standardized non-intercept coefficients.
    pub ridge: f64,
    pub max_iter: usize,
    pub tolerance: f64,
    /// Replace every column by quantile-bin indicators with this many bins.
    pub n_bins: Option<usize>,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            ridge: 1e-6,
            max_iter: 100,
            tolerance: 1e-8,
            n_bins: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the objective gradient at the returned iterate.
    pub gradient_norm: f64,
    /// The fitted linear predictor splits the classes perfectly, so the
    /// unpenalized maximum does not exist.
    pub separated: bool,
}

/// Equal-frequency bin edges per column, learned on training rows.
///
/// A value `v` falls in bin `#{edges <= v}`; values below the first edge
/// (including those below the training minimum) land in bin 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBinning {
    pub columns: Vec<String>,
    pub edges: Vec<Vec<f64>>,
    /// Columns whose training data had missing values get an extra indicator.
    pub missing_bin: Vec<bool>,
}

impl QuantileBinning {
    pub fn fit(x: &Array2<f64>, columns: &[String], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidArgument("need at least one bin".into()));
        }
        let mut edges = Vec::with_capacity(x.ncols());
        let mut missing_bin = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut v: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
            missing_bin.push(v.len() < col.len());
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mut e: Vec<f64> = Vec::new();
            if n > 0 {
                for k in 1..n_bins {
                    let idx = (k * n).div_ceil(n_bins);
                    if idx < n {
                        e.push(v[idx]);
                    }
                }
                e.dedup();
                e.retain(|&edge| edge > v[0]);
            }
            edges.push(e);
        }
        Ok(QuantileBinning {
            columns: columns.to_vec(),
            edges,
            missing_bin,
        })
    }

    pub fn n_bins(&self, column: usize) -> usize {
        self.edges[column].len() + 1
    }

    pub fn bin_of(&self, column: usize, value: f64) -> Option<usize> {
        if value.is_nan() {
            return None;
        }
        Some(self.edges[column].partition_point(|&e| e <= value))
    }

    /// Names of the indicator columns produced by [`QuantileBinning::transform`].
    pub fn design_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (c, name) in self.columns.iter().enumerate() {
            for b in 1..self.n_bins(c) {
                names.push(format!("{name}[bin {b}]"));
            }
            if self.missing_bin[c] {
                names.push(format!("{name}[missing]"));
            }
        }
        names
    }

    /// Dummy coding with bin 0 as the reference level. A missing value in a
    /// column that had none during fitting is coded like the reference bin.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.edges.len() {
            return Err(Error::SchemaMismatch(format!(
                "binning fitted on {} columns, got {}",
                self.edges.len(),
                x.ncols()
            )));
        }
        let width = self.design_names().len();
        let mut out = Array2::zeros((x.nrows(), width));
        for (r, row) in x.rows().into_iter().enumerate() {
            let mut offset = 0;
            for (c, &v) in row.iter().enumerate() {
                let nb = self.n_bins(c);
                match self.bin_of(c, v) {
                    Some(b) if b > 0 => out[[r, offset + b - 1]] = 1.0,
                    Some(_) => {}
                    None if self.missing_bin[c] => out[[r, offset + nb - 1]] = 1.0,
                    None => {}
                }
                offset += nb - 1 + self.missing_bin[c] as usize;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    /// Columns of the design the coefficients refer to.
    pub design_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub imputer: Option<Imputer>,
    pub binning: Option<QuantileBinning>,
    pub convergence: Convergence,
}

impl LogisticModel {
    pub fn design(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} columns, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        match (&self.binning, &self.imputer) {
            (Some(b), _) => b.transform(x),
            (None, Some(imp)) => imp.transform(x),
            (None, None) => Ok(x.clone()),
        }
    }

    pub fn margins(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let d = self.design(x)?;
        Ok(d.rows()
            .into_iter()
            .map(|row| self.intercept + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self.margins(x)?.into_iter().map(sigmoid).collect())
    }
}

pub fn fit_logistic(train: &TrainSet, config: &LogisticConfig) -> Result<LogisticModel> {
    let data: &Dataset = train.data();
    data.require_both_classes("logistic regression")?;
    if config.ridge < 0.0 {
        return Err(Error::InvalidArgument("ridge penalty must be non-negative".into()));
    }
    let (imputer, binning, design) = match config.n_bins {
        Some(nb) => {
            let b = QuantileBinning::fit(&data.x, &data.feature_names, nb)?;
            let d = b.transform(&data.x)?;
            (None, Some(b), d)
        }
        None => {
            let imp = Imputer::fit(&data.x);
            let d = imp.transform(&data.x)?;
            (Some(imp), None, d)
        }
    };
    let design_names = match &binning {
        Some(b) => b.design_names(),
        None => data.feature_names.clone(),
    };
    let (intercept, coefficients, convergence) = newton(&design, &data.y, &data.weights, config);
    Ok(LogisticModel {
        feature_names: data.feature_names.clone(),
        design_names,
        intercept,
        coefficients,
        imputer,
        binning,
        convergence,
    })
}

/// Penalized mean log-likelihood on the standardized design `z` with
/// coefficients `beta` (intercept first).
fn objective(z: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, wsum: f64, beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = z * beta;
    let mut ll = 0.0;
    for i in 0..y.len() {
        let p = clamp_probability(sigmoid(eta[i]));
        ll += w[i] * (y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln());
    }
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    ll / wsum - 0.5 * ridge * penalty
}

/// Newton ascent with step halving. Returns the coefficients mapped back to
/// the unstandardized design.
fn newton(design: &Array2<f64>, y: &[u8], weights: &[f64], config: &LogisticConfig) -> (f64, Vec<f64>, Convergence) {
    let (n, p) = design.dim();
    let mut mean = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for (j, col) in design.columns().into_iter().enumerate() {
        let m = col.mean().unwrap_or(0.0);
        let s = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        mean[j] = m;
        if s > 0.0 {
            scale[j] = s.sqrt();
        }
    }
    let z = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (design[[i, j - 1]] - mean[j - 1]) / scale[j - 1]
        }
    });
    let yv = DVector::from_iterator(n, y.iter().map(|&v| v as f64));
    let wv = DVector::from_column_slice(weights);
    let wsum = wv.sum();
    let ridge = config.ridge;

    let mut beta = DVector::zeros(p + 1);
    let mut obj = objective(&z, &yv, &wv, wsum, &beta, ridge);
    let mut status = Convergence {
        converged: false,
        iterations: 0,
        gradient_norm: f64::INFINITY,
        separated: false,
    };
    for iter in 0..=config.max_iter {
        let eta = &z * &beta;
        let prob = eta.map(sigmoid);
        let resid = DVector::from_fn(n, |i, _| wv[i] * (yv[i] - prob[i]) / wsum);
        let mut grad = z.transpose() * &resid;
        for j in 1..=p {
            grad[j] -= ridge * beta[j];
        }
        status.iterations = iter;
        status.gradient_norm = grad.amax();
        if status.gradient_norm < config.tolerance {
            status.converged = true;
            break;
        }
        if iter == config.max_iter {
            break;
        }
        let curv = DVector::from_fn(n, |i, _| wv[i] * prob[i] * (1.0 - prob[i]) / wsum);
        let mut info = z.transpose() * DMatrix::from_diagonal(&curv) * &z;
        for j in 1..=p {
            info[(j, j)] += ridge;
        }
        // Keeps the system solvable when the design is rank deficient.
        for j in 0..=p {
            info[(j, j)] += 1e-12;
        }
        let Some(step) = info.clone().cholesky().map(|c| c.solve(&grad)).or_else(|| info.lu().solve(&grad)) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = &beta + &step * t;
            let cand_obj = objective(&z, &yv, &wv, wsum, &candidate, ridge);
            if cand_obj >= obj {
                beta = candidate;
                obj = cand_obj;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let eta = &z * &beta;
    let lowest_bad = (0..n).filter(|&i| y[i] == 1).map(|i| eta[i]).fold(f64::INFINITY, f64::min);
    let highest_good = (0..n).filter(|&i| y[i] == 0).map(|i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
    status.separated = lowest_bad > highest_good;
    if status.separated {
        status.converged = false;
    }

    let coefficients: Vec<f64> = (0..p).map(|j| beta[j + 1] / scale[j]).collect();
    let intercept = beta[0] - coefficients.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    (intercept, coefficients, status)
}
