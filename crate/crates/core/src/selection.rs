//! Column pruning: constant, mostly-missing and highly correlated features,
//! plus top-k reduction by mean absolute SHAP value.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.95;
pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RemovalReason {
    Constant,
    Missing { fraction: f64 },
    Correlated { with: String, r: f64 },
    NotInTopK { importance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedColumn {
    pub column: String,
    #[serde(flatten)]
    pub reason: RemovalReason,
}

/// Which columns were removed and why. `surviving` keeps the original order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub original: Vec<String>,
    pub removed: Vec<RemovedColumn>,
    pub surviving: Vec<String>,
    pub notes: Vec<String>,
}

impl SelectionReport {
    fn identity(columns: &[String]) -> Self {
        SelectionReport {
            original: columns.to_vec(),
            removed: Vec::new(),
            surviving: columns.to_vec(),
            notes: Vec::new(),
        }
    }

    fn from_removals(columns: &[String], removed: Vec<RemovedColumn>) -> Self {
        let gone: HashSet<&str> = removed.iter().map(|r| r.column.as_str()).collect();
        let surviving = columns.iter().filter(|c| !gone.contains(c.as_str())).cloned().collect();
        SelectionReport {
            original: columns.to_vec(),
            removed,
            surviving,
            notes: Vec::new(),
        }
    }

    /// Chains a later pruning step onto this one.
    pub fn merge(mut self, next: SelectionReport) -> SelectionReport {
        self.removed.extend(next.removed);
        self.surviving = next.surviving;
        self.notes.extend(next.notes);
        self
    }

    fn apply(&self, matrix: &FeatureMatrix) -> FeatureMatrix {
        matrix
            .select_named(&self.surviving)
            .expect("surviving columns come from the matrix")
    }
}

impl fmt::Display for SelectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<40} reason", "removed column")?;
        for r in &self.removed {
            let reason = match &r.reason {
                RemovalReason::Constant => "constant".to_string(),
                RemovalReason::Missing { fraction } => format!("missing ({:.3})", fraction),
                RemovalReason::Correlated { with, r } => format!("correlated with {with} (r = {r:.4})"),
                RemovalReason::NotInTopK { importance } => format!("not in top k (importance {importance:.4})"),
            };
            writeln!(f, "{:<40} {}", r.column, reason)?;
        }
        writeln!(
            f,
            "{} of {} columns kept, {} removed",
            self.surviving.len(),
            self.original.len(),
            self.removed.len()
        )?;
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Removes columns with at most one distinct non-missing value.
pub fn drop_constant(matrix: &FeatureMatrix) -> (FeatureMatrix, SelectionReport) {
    let removed = (0..matrix.n_cols())
        .filter(|&c| {
            let col = matrix.column(c);
            let mut values = col.iter().copied().filter(|v| !v.is_nan());
            match values.next() {
                None => true,
                Some(first) => values.all(|v| v == first),
            }
        })
        .map(|c| RemovedColumn {
            column: matrix.columns[c].clone(),
            reason: RemovalReason::Constant,
        })
        .collect();
    let report = SelectionReport::from_removals(&matrix.columns, removed);
    (report.apply(matrix), report)
}

/// Fraction of missing (and optionally zero) entries per column.
pub fn missing_fraction(matrix: &FeatureMatrix, treat_zero_as_missing: bool) -> Vec<f64> {
    let n = matrix.n_rows().max(1) as f64;
    (0..matrix.n_cols())
        .map(|c| {
            matrix
                .column(c)
                .iter()
                .filter(|v| v.is_nan() || (treat_zero_as_missing && **v == 0.0))
                .count() as f64
                / n
        })
        .collect()
}

/// Removes columns whose missing fraction is strictly above `threshold`.
pub fn drop_missing(
    matrix: &FeatureMatrix,
    threshold: f64,
    treat_zero_as_missing: bool,
) -> (FeatureMatrix, SelectionReport) {
    let fractions = missing_fraction(matrix, treat_zero_as_missing);
    let removed = fractions
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > threshold)
        .map(|(c, &fraction)| RemovedColumn {
            column: matrix.columns[c].clone(),
            reason: RemovalReason::Missing { fraction },
        })
        .collect();
    let mut report = SelectionReport::from_removals(&matrix.columns, removed);
    report.notes.push(format!(
        "missing threshold {threshold} (strict >), zeros counted as missing: {treat_zero_as_missing}"
    ));
    (report.apply(matrix), report)
}

/// Pearson correlation over rows where both values are present. Fewer than two
/// overlapping rows, or a zero-variance overlap, yields 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(&x, &y)| (x, y))
        .collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Ordered pair scan: for `i < j` in column order, `j` is removed when
/// `|r(i, j)| > threshold` and neither has been removed yet.
pub fn correlation_prune(matrix: &FeatureMatrix, threshold: f64) -> Result<(FeatureMatrix, SelectionReport)> {
    if matrix.n_rows() < 2 {
        return Err(Error::InvalidArgument("correlation pruning needs at least two rows".into()));
    }
    let p = matrix.n_cols();
    let columns: Vec<Vec<f64>> = (0..p).map(|c| matrix.column(c).to_vec()).collect();
    // Upper-triangle correlations, computed in parallel per row of the triangle.
    let corr: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| ((i + 1)..p).map(|j| pearson(&columns[i], &columns[j])).collect())
        .collect();

    let mut removed_flag = vec![false; p];
    let mut removed = Vec::new();
    for i in 0..p {
        if removed_flag[i] {
            continue;
        }
        for j in (i + 1)..p {
            if removed_flag[j] {
                continue;
            }
            let r = corr[i][j - i - 1];
            if r.abs() > threshold {
                removed_flag[j] = true;
                removed.push(RemovedColumn {
                    column: matrix.columns[j].clone(),
                    reason: RemovalReason::Correlated {
                        with: matrix.columns[i].clone(),
                        r,
                    },
                });
            }
        }
    }
    let mut report = SelectionReport::from_removals(&matrix.columns, removed);
    report.notes.push(format!(
        "correlation threshold is a Pearson coefficient |r| > {threshold}"
    ));
    Ok((report.apply(matrix), report))
}

/// Keeps the `k` columns with the largest importance, ties broken by column
/// order. The subset keeps the original column order.
pub fn select_top_k_by_shap(
    columns: &[String],
    importance: &[f64],
    k: usize,
) -> Result<SelectionReport> {
    if importance.len() != columns.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} importances for {} columns",
            importance.len(),
            columns.len()
        )));
    }
    if k > columns.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} surviving columns",
            columns.len()
        )));
    }
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let keep: HashSet<usize> = order[..k].iter().copied().collect();
    let removed = (0..columns.len())
        .filter(|c| !keep.contains(c))
        .map(|c| RemovedColumn {
            column: columns[c].clone(),
            reason: RemovalReason::NotInTopK {
                importance: importance[c],
            },
        })
        .collect();
    Ok(SelectionReport::from_removals(columns, removed))
}

/// Constant, then missing, then correlation pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub correlation_threshold: f64,
    pub missing_threshold: f64,
    pub treat_zero_as_missing: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
            missing_threshold: DEFAULT_MISSING_THRESHOLD,
            treat_zero_as_missing: false,
        }
    }
}

pub fn prune(matrix: &FeatureMatrix, config: &PruneConfig) -> Result<(FeatureMatrix, SelectionReport)> {
    let (m, constant) = drop_constant(matrix);
    let (m, missing) = drop_missing(&m, config.missing_threshold, config.treat_zero_as_missing);
    let (m, correlated) = correlation_prune(&m, config.correlation_threshold)?;
    let report = constant.merge(missing).merge(correlated);
    Ok((m, report))
}

impl SelectionReport {
    pub fn empty_for(matrix: &FeatureMatrix) -> Self {
        Self::identity(&matrix.columns)
    }
}
