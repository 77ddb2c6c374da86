//! Classification metrics, stratified splitting and k-fold cross-validation.
//!
//! The positive class is "bad" (label 1): a true positive is a defaulting
//! account flagged as bad.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TestSet, TrainSet};
use crate::error::{Error, Result};
use crate::models::{fit_model, ModelKind, TrainConfig};
use crate::resampling::{resample, ResamplingStrategy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn) as f64
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

pub fn confusion_matrix(y: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix> {
    if y.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels but {} predictions",
            y.len(),
            predicted.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in y.iter().zip(predicted) {
        match (t, p) {
            (1, 1) => m.tp += 1,
            (0, 1) => m.fp += 1,
            (0, 0) => m.tn += 1,
            (1, 0) => m.fn_ += 1,
            _ => return Err(Error::InvalidArgument(format!("non-binary pair ({t}, {p})"))),
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub gini: f64,
}

/// ROC curve from a sweep over distinct scores, highest first. Tied scores
/// move both rates in one step, so ties earn half credit under the trapezoid.
pub fn roc_auc(y: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if y.len() != scores.len() {
        return Err(Error::InvalidArgument(format!("{} labels but {} scores", y.len(), scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Trapezoid in count units; normalized below.
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = auc / (pos as f64 * neg as f64);
    Ok(RocCurve {
        points,
        auc,
        gini: 2.0 * auc - 1.0,
    })
}

pub fn roc_auc_score(y: &[u8], scores: &[f64]) -> Result<f64> {
    Ok(roc_auc(y, scores)?.auc)
}

pub fn gini(auc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&auc) {
        return Err(Error::InvalidArgument(format!("AUC {auc} outside [0, 1]")));
    }
    Ok(2.0 * auc - 1.0)
}

/// Splits rows into train and test. With stratification each class keeps its
/// share within one row; the overall train size is `round(n * fraction)`.
pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64, stratified: bool) -> Result<(TrainSet, TestSet)> {
    let (train_rows, test_rows) = split_indices(data, train_fraction, seed, stratified)?;
    Ok((
        TrainSet::new(data.select_rows(&train_rows)),
        TestSet::new(data.select_rows(&test_rows)),
    ))
}

/// Row indices behind [`train_test_split`], each list sorted ascending.
pub fn split_indices(data: &Dataset, train_fraction: f64, seed: u64, stratified: bool) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    data.require_both_classes("train/test split")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n_rows();
    let n_train = (n as f64 * train_fraction).round() as usize;
    let groups: Vec<Vec<usize>> = if stratified {
        [0u8, 1]
            .iter()
            .map(|&c| (0..n).filter(|&i| data.y[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    // Largest-remainder allocation of the train quota across groups.
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * n_train as f64 / n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut by_remainder: Vec<usize> = (0..groups.len()).collect();
    by_remainder.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = n_train - quota.iter().sum::<usize>();
    for g in by_remainder {
        if left == 0 {
            break;
        }
        quota[g] += 1;
        left -= 1;
    }

    let mut train_rows = Vec::with_capacity(n_train);
    let mut test_rows = Vec::with_capacity(n - n_train);
    for (g, q) in groups.into_iter().zip(quota) {
        let mut g = g;
        g.shuffle(&mut rng);
        train_rows.extend_from_slice(&g[..q]);
        test_rows.extend_from_slice(&g[q..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((train_rows, test_rows))
}

/// Assigns rows to `k` folds so that each class is spread evenly. Errors when
/// some fold would miss a class.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > y.len() {
        return Err(Error::InvalidArgument(format!("{k} folds for {} rows", y.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if rows.len() < k {
            return Err(Error::SingleClass(format!(
                "class {class} has {} rows, too few for {k} stratified folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for r in rows {
            folds[next % k].push(r);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-fold results of cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: String,
    pub resampling: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over the fold Ginis (denominator `k - 1`).
    pub std: f64,
    /// ROC of the pooled out-of-fold scores.
    pub roc: Vec<RocPoint>,
}

impl CvResult {
    pub fn from_folds(model: &str, resampling: &str, seed: u64, folds: Vec<f64>, roc: Vec<RocPoint>) -> Self {
        let k = folds.len();
        let mean = folds.iter().sum::<f64>() / k as f64;
        let std = if k > 1 {
            (folds.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        CvResult {
            model: model.to_string(),
            resampling: resampling.to_string(),
            k,
            seed,
            folds,
            mean,
            std,
            roc,
        }
    }

    /// `mean (std)` with two decimals, e.g. `0.68 (0.08)`.
    pub fn summary(&self) -> String {
        format!("{:.2} ({:.2})", self.mean, self.std)
    }

    pub fn to_report(&self, feature_set: &str) -> EvalReport {
        EvalReport {
            model: self.model.clone(),
            resampling: self.resampling.clone(),
            feature_set: feature_set.to_string(),
            folds: self.folds.clone(),
            mean: self.mean,
            std: self.std,
            std_denominator: "k-1".into(),
            roc: self.roc.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub resampling: String,
    pub feature_set: String,
    pub folds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub std_denominator: String,
    pub roc: Vec<RocPoint>,
}

/// Runs `score` on every stratified fold in parallel. `score` receives the
/// fold's training and test partitions and returns one score per test row.
/// Folds whose test scores are constant get Gini 0.
pub fn cross_validate_with<F>(data: &Dataset, k: usize, seed: u64, score: F) -> Result<(Vec<f64>, RocCurve)>
where
    F: Fn(usize, &TrainSet, &TestSet) -> Result<Vec<f64>> + Sync,
{
    let folds = stratified_folds(&data.y, k, seed)?;
    let results: Vec<Result<(Vec<usize>, Vec<f64>, f64)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_rows)| {
            let mut in_test = vec![false; data.n_rows()];
            for &r in test_rows {
                in_test[r] = true;
            }
            let train_rows: Vec<usize> = (0..data.n_rows()).filter(|&r| !in_test[r]).collect();
            let train = TrainSet::new(data.select_rows(&train_rows));
            let test = TestSet::new(data.select_rows(test_rows));
            let scores = score(f, &train, &test)?;
            if scores.len() != test.n_rows() {
                return Err(Error::Compute(format!(
                    "fold {f}: {} scores for {} rows",
                    scores.len(),
                    test.n_rows()
                )));
            }
            let g = roc_auc(&test.y, &scores)?.gini;
            Ok((test_rows.clone(), scores, g))
        })
        .collect();

    let mut ginis = Vec::with_capacity(k);
    let mut pooled = vec![0.0; data.n_rows()];
    for r in results {
        let (rows, scores, g) = r?;
        for (row, s) in rows.into_iter().zip(scores) {
            pooled[row] = s;
        }
        ginis.push(g);
    }
    Ok((ginis, roc_auc(&data.y, &pooled)?))
}

/// k-fold cross-validation of one model family under one resampling strategy.
/// Resampling and every fitted statistic see only the fold's training rows.
pub fn cross_validate(
    kind: ModelKind,
    config: &TrainConfig,
    strategy: &ResamplingStrategy,
    data: &Dataset,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let (folds, roc) = cross_validate_with(data, k, seed, |f, train, test| {
        let fold_seed = seed.wrapping_add(f as u64 + 1);
        let strategy = ResamplingStrategy {
            seed: strategy.seed.wrapping_add(f as u64),
            ..strategy.clone()
        };
        let (train, _) = resample(train, &strategy)?;
        let model = fit_model(kind, &train, config, fold_seed)?;
        model.predict_proba(&test.x)
    })?;
    Ok(CvResult::from_folds(kind.label(), strategy.kind.label(), seed, folds, roc.points))
}
