//! Model × resampling × feature-set comparison grid.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};
use crate::explain::global_importance;
use crate::features::FeatureMatrix;
use crate::metrics::cross_validate;
use crate::models::{fit_model, ModelKind, TrainConfig};
use crate::resampling::{ResamplingKind, ResamplingStrategy};
use crate::selection::select_top_k_by_shap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Every column that survived pruning.
    Full,
    /// The `k` columns with the largest mean |SHAP| under the benchmark model.
    TopK(usize),
}

impl FeatureSet {
    pub fn label(self) -> String {
        match self {
            FeatureSet::Full => "full".into(),
            FeatureSet::TopK(k) => format!("top_{k}"),
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(FeatureSet::Full);
        }
        s.strip_prefix("top_")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k > 0)
            .map(FeatureSet::TopK)
            .ok_or_else(|| Error::Config(format!("unknown feature set `{s}` (expected `full` or `top_<k>`)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: ModelKind,
    pub resampling: ResamplingKind,
    pub feature_set: FeatureSet,
    /// Whether the reference comparison table reports this combination.
    /// Other cells are optional extras.
    pub listed: bool,
}

impl GridCell {
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.model, self.resampling, self.feature_set.label())
    }
}

/// Rows of the reference comparison table and whether a reduced-feature
/// result was reported for them.
const TABLE_ROWS: &[(ModelKind, ResamplingKind, bool)] = {
    use ModelKind::*;
    use ResamplingKind::*;
    &[
        (Logistic, None, true),
        (Logistic, BorderlineSmote, true),
        (Logistic, SvmSmote, true),
        (LogisticBinned, None, false),
        (LogisticBinned, BorderlineSmote, false),
        (LogisticBinned, SvmSmote, false),
        (RandomForest, None, true),
        (RandomForest, BorderlineSmote, true),
        (RandomForest, SvmSmote, true),
        (RandomForest, Oversample, true),
        (RandomForest, Undersample, true),
        (GradientBoosting, None, true),
        (GradientBoosting, BorderlineSmote, true),
        (GradientBoosting, SvmSmote, true),
        (GradientBoosting, Oversample, true),
        (GradientBoosting, Undersample, true),
        (ObliviousBoosting, None, true),
        (ObliviousBoosting, ClassWeightProportional, true),
        (ObliviousBoosting, BorderlineSmote, true),
        (ObliviousBoosting, SvmSmote, true),
        (ObliviousBoosting, Oversample, true),
        (ObliviousBoosting, Undersample, true),
        (Mlp, ClassWeightProportional, true),
    ]
};

fn is_listed(model: ModelKind, resampling: ResamplingKind, fs: FeatureSet) -> bool {
    TABLE_ROWS
        .iter()
        .any(|&(m, r, reduced)| m == model && r == resampling && (fs == FeatureSet::Full || reduced))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells: Vec<GridCell>,
}

impl GridSpec {
    /// The reference table's cells for the given feature sets.
    pub fn table(feature_sets: &[FeatureSet]) -> Self {
        let cells = TABLE_ROWS
            .iter()
            .flat_map(|&(model, resampling, _)| {
                feature_sets.iter().map(move |&feature_set| GridCell {
                    model,
                    resampling,
                    feature_set,
                    listed: true,
                })
            })
            .filter(|c| is_listed(c.model, c.resampling, c.feature_set))
            .collect();
        GridSpec { cells }
    }

    /// Every combination, minus class weighting on models whose fit ignores
    /// sample weights.
    pub fn cartesian(models: &[ModelKind], resamplers: &[ResamplingKind], feature_sets: &[FeatureSet]) -> Self {
        let mut cells = Vec::new();
        for &model in models {
            for &resampling in resamplers {
                if resampling.is_class_weight() && !model.uses_weighted_loss() {
                    continue;
                }
                for &feature_set in feature_sets {
                    cells.push(GridCell {
                        model,
                        resampling,
                        feature_set,
                        listed: is_listed(model, resampling, feature_set),
                    });
                }
            }
        }
        GridSpec { cells }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.cells {
            if !seen.insert(c.label()) {
                return Err(Error::Config(format!("duplicate grid cell `{}`", c.label())));
            }
        }
        Ok(())
    }
}

/// Seed of one cell: the first eight bytes of `SHA-256(seed ‖ label)`, so a
/// cell's result does not depend on which other cells run or in what order.
pub fn cell_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub label: String,
    pub model: String,
    pub resampling: String,
    pub feature_set: String,
    pub listed: bool,
    pub n_features: usize,
    pub seed: u64,
    pub folds: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub error: Option<String>,
}

impl GridRow {
    /// `mean (std)`, or `error` for failed cells.
    pub fn cell_text(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format!("{m:.2} ({s:.2})"),
            _ => "error".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<GridRow>,
    /// Feature ranking behind the reduced feature sets, most important first.
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub train: TrainConfig,
    pub k: usize,
    pub k_neighbors: usize,
    pub seed: u64,
}

/// Cross-validates every cell in parallel. A failing cell becomes a row with
/// an error message; the grid itself only fails on invalid input.
///
/// Reduced feature sets rank columns by mean |SHAP| of an oblivious-boosting
/// model fit on every row and every column of `matrix`.
pub fn run_grid(spec: &GridSpec, matrix: &FeatureMatrix, options: &GridOptions) -> Result<GridReport> {
    spec.validate()?;
    if options.k < 2 {
        return Err(Error::Config("grid needs k >= 2".into()));
    }
    let full = Dataset::from_matrix(matrix);
    full.require_both_classes("grid")?;
    let needs_ranking = spec.cells.iter().any(|c| matches!(c.feature_set, FeatureSet::TopK(_)));
    let ranking: Vec<String> = if needs_ranking {
        let bench_seed = cell_seed(options.seed, "benchmark");
        let model = fit_model(
            ModelKind::ObliviousBoosting,
            &TrainSet::without_holdout(full.clone()),
            &options.train,
            bench_seed,
        )?;
        let ensemble = model.tree_ensemble().expect("oblivious boosting yields trees");
        global_importance(ensemble, &full.x)?
            .ranked_names()
            .into_iter()
            .map(String::from)
            .collect()
    } else {
        Vec::new()
    };

    let subset = |fs: FeatureSet| -> Result<FeatureMatrix> {
        match fs {
            FeatureSet::Full => Ok(matrix.clone()),
            FeatureSet::TopK(k) => {
                let importance: Vec<f64> = matrix
                    .columns
                    .iter()
                    .map(|c| {
                        let rank = ranking.iter().position(|r| r == c).unwrap_or(ranking.len());
                        -(rank as f64)
                    })
                    .collect();
                let report = select_top_k_by_shap(&matrix.columns, &importance, k)?;
                matrix.select_named(&report.surviving)
            }
        }
    };

    let rows = spec
        .cells
        .par_iter()
        .map(|cell| {
            let label = cell.label();
            let seed = cell_seed(options.seed, &label);
            let mut row = GridRow {
                label,
                model: cell.model.label().into(),
                resampling: cell.resampling.label().into(),
                feature_set: cell.feature_set.label(),
                listed: cell.listed,
                n_features: 0,
                seed,
                folds: Vec::new(),
                mean: None,
                std: None,
                error: None,
            };
            let outcome = subset(cell.feature_set).and_then(|m| {
                row.n_features = m.n_cols();
                let strategy = ResamplingStrategy {
                    kind: cell.resampling,
                    k_neighbors: options.k_neighbors,
                    seed,
                };
                cross_validate(cell.model, &options.train, &strategy, &Dataset::from_matrix(&m), options.k, seed)
            });
            match outcome {
                Ok(cv) => {
                    row.folds = cv.folds;
                    row.mean = Some(cv.mean);
                    row.std = Some(cv.std);
                }
                Err(e) => {
                    log::warn!("grid cell {} failed: {e}", row.label);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(GridReport {
        k: options.k,
        seed: options.seed,
        rows,
        ranking,
    })
}

impl GridReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Compute(format!("writing grid CSV: {e}"));
        w.write_record([
            "label",
            "model",
            "resampling",
            "feature_set",
            "listed",
            "n_features",
            "seed",
            "mean",
            "std",
            "gini",
            "folds",
            "error",
        ])
        .map_err(err)?;
        for r in &self.rows {
            let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let folds = r.folds.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            w.write_record([
                r.label.as_str(),
                &r.model,
                &r.resampling,
                &r.feature_set,
                if r.listed { "true" } else { "false" },
                &r.n_features.to_string(),
                &r.seed.to_string(),
                &num(r.mean),
                &num(r.std),
                &r.cell_text(),
                &folds,
                r.error.as_deref().unwrap_or(""),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Compute(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Compute(e.to_string()))
    }

    /// One line per (model, resampling) with a column per feature set, the
    /// layout of a printed comparison table.
    pub fn to_text(&self) -> String {
        let mut sets: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            if !sets.contains(&r.feature_set.as_str()) {
                sets.push(&r.feature_set);
            }
            if !keys.contains(&(r.model.as_str(), r.resampling.as_str())) {
                keys.push((&r.model, &r.resampling));
            }
        }
        let mut out = String::new();
        let _ = write!(out, "{:<20} {:<18}", "model", "resampling");
        for s in &sets {
            let _ = write!(out, " {:>14}", format!("gini {s}"));
        }
        out.push('\n');
        for (m, rs) in keys {
            let _ = write!(out, "{m:<20} {rs:<18}");
            for s in &sets {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.model == m && r.resampling == rs && r.feature_set == *s)
                    .map(|r| if r.listed { r.cell_text() } else { format!("{}*", r.cell_text()) })
                    .unwrap_or_default();
                let _ = write!(out, " {cell:>14}");
            }
            out.push('\n');
        }
        if self.rows.iter().any(|r| !r.listed) {
            out.push_str("* combination outside the reference table\n");
        }
        let _ = writeln!(out, "{}-fold CV, sample std over folds, seed {}", self.k, self.seed);
        out
    }
}
