//! Class balancing for training partitions.
//!
//! Every resampler consumes a [`TrainSet`] and returns a new one, so test rows
//! can never be resampled. Neighbor searches run on median-imputed,
//! standardized copies of the features; emitted rows stay in original units.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};
use crate::features::{Imputer, ScalerParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingKind {
    None,
    Undersample,
    Oversample,
    Smote,
    BorderlineSmote,
    SvmSmote,
    ClassWeightProportional,
    ClassWeightSqrtBalanced,
}

impl ResamplingKind {
    pub const ALL: [ResamplingKind; 8] = [
        ResamplingKind::None,
        ResamplingKind::Undersample,
        ResamplingKind::Oversample,
        ResamplingKind::Smote,
        ResamplingKind::BorderlineSmote,
        ResamplingKind::SvmSmote,
        ResamplingKind::ClassWeightProportional,
        ResamplingKind::ClassWeightSqrtBalanced,
    ];

    /// Config label.
    pub fn label(self) -> &'static str {
        match self {
            ResamplingKind::None => "none",
            ResamplingKind::Undersample => "undersample",
            ResamplingKind::Oversample => "oversample",
            ResamplingKind::Smote => "smote",
            ResamplingKind::BorderlineSmote => "borderline_smote",
            ResamplingKind::SvmSmote => "svm_smote",
            ResamplingKind::ClassWeightProportional => "class_weight",
            ResamplingKind::ClassWeightSqrtBalanced => "sqrt_balanced",
        }
    }

    pub fn is_class_weight(self) -> bool {
        matches!(
            self,
            ResamplingKind::ClassWeightProportional | ResamplingKind::ClassWeightSqrtBalanced
        )
    }
}

impl fmt::Display for ResamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ResamplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ResamplingKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown resampling strategy `{s}` (expected one of {})",
                    ResamplingKind::ALL.map(|k| k.label()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingStrategy {
    pub kind: ResamplingKind,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for ResamplingStrategy {
    fn default() -> Self {
        ResamplingStrategy {
            kind: ResamplingKind::None,
            k_neighbors: 5,
            seed: 0,
        }
    }
}

impl ResamplingStrategy {
    pub fn new(kind: ResamplingKind, seed: u64) -> Self {
        ResamplingStrategy {
            kind,
            seed,
            ..Default::default()
        }
    }
}

/// Provenance of one synthetic row: `x = base + lambda * (neighbor - base)`,
/// with `base` and `neighbor` indexing rows of the input training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

/// Linear SVM used by SVM-SMOTE, in standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub strategy: String,
    pub input_counts: (usize, usize),
    pub output_counts: (usize, usize),
    /// Input rows used as interpolation seeds (SMOTE family).
    pub seeds: Vec<usize>,
    /// One entry per appended synthetic row, in output order.
    pub synthetic: Vec<SyntheticOrigin>,
    pub svm: Option<LinearSvm>,
    pub notes: Vec<String>,
}

/// Per-class multipliers applied to sample weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub good: f64,
    pub bad: f64,
}

impl ClassWeights {
    pub fn for_label(&self, y: u8) -> f64 {
        if y == 1 {
            self.bad
        } else {
            self.good
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    /// `w_good = 1`, `w_bad = sum(good) / sum(bad)`.
    Proportional,
    /// `CW_k = sqrt(max_c S_c / S_k)` with `S_c` the weight sum of class `c`.
    SqrtBalanced,
}

/// Class weights from labels and existing sample weights.
pub fn class_weights(y: &[u8], sample_weights: &[f64], mode: ClassWeightMode) -> Result<ClassWeights> {
    let mut sums = [0.0f64; 2];
    for (&label, &w) in y.iter().zip(sample_weights) {
        sums[label as usize] += w;
    }
    if sums[0] == 0.0 || sums[1] == 0.0 {
        return Err(Error::SingleClass("class weights need both classes".into()));
    }
    Ok(match mode {
        ClassWeightMode::Proportional => ClassWeights {
            good: 1.0,
            bad: sums[0] / sums[1],
        },
        ClassWeightMode::SqrtBalanced => {
            let max = sums[0].max(sums[1]);
            ClassWeights {
                good: (max / sums[0]).sqrt(),
                bad: (max / sums[1]).sqrt(),
            }
        }
    })
}

/// Dispatches on the strategy kind.
pub fn resample(train: &TrainSet, strategy: &ResamplingStrategy) -> Result<(TrainSet, ResampleReport)> {
    if strategy.k_neighbors == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be at least 1".into()));
    }
    let (out, mut report) = match strategy.kind {
        ResamplingKind::None => (train.clone(), ResampleReport::default()),
        ResamplingKind::Undersample => (undersample_majority(train, strategy.seed)?, ResampleReport::default()),
        ResamplingKind::Oversample => (oversample_minority(train, strategy.seed)?, ResampleReport::default()),
        ResamplingKind::Smote => smote(train, strategy.k_neighbors, strategy.seed)?,
        ResamplingKind::BorderlineSmote => borderline_smote(train, strategy.k_neighbors, strategy.seed)?,
        ResamplingKind::SvmSmote => svm_smote(train, strategy.k_neighbors, strategy.seed)?,
        ResamplingKind::ClassWeightProportional | ResamplingKind::ClassWeightSqrtBalanced => {
            let mode = if strategy.kind == ResamplingKind::ClassWeightProportional {
                ClassWeightMode::Proportional
            } else {
                ClassWeightMode::SqrtBalanced
            };
            let cw = class_weights(&train.y, &train.weights, mode)?;
            let mut data = train.data().clone();
            for (w, &y) in data.weights.iter_mut().zip(&data.y) {
                *w *= cw.for_label(y);
            }
            let mut report = ResampleReport::default();
            report.notes.push(format!("class weights good = {}, bad = {}", cw.good, cw.bad));
            (TrainSet::new(data), report)
        }
    };
    report.strategy = strategy.kind.label().to_string();
    report.input_counts = train.class_counts();
    report.output_counts = out.class_counts();
    Ok((out, report))
}

struct Classes {
    minority_label: u8,
    minority: Vec<usize>,
    majority: Vec<usize>,
}

fn split_classes(data: &Dataset) -> Result<Classes> {
    let good: Vec<usize> = (0..data.n_rows()).filter(|&i| data.y[i] == 0).collect();
    let bad: Vec<usize> = (0..data.n_rows()).filter(|&i| data.y[i] == 1).collect();
    if good.is_empty() || bad.is_empty() {
        return Err(Error::SingleClass("resampling needs both classes".into()));
    }
    Ok(if bad.len() <= good.len() {
        Classes {
            minority_label: 1,
            minority: bad,
            majority: good,
        }
    } else {
        Classes {
            minority_label: 0,
            minority: good,
            majority: bad,
        }
    })
}

/// Keeps every minority row and an equal-size sample of majority rows drawn
/// without replacement. Output rows are shuffled.
pub fn undersample_majority(train: &TrainSet, seed: u64) -> Result<TrainSet> {
    let classes = split_classes(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = classes
        .majority
        .choose_multiple(&mut rng, classes.minority.len())
        .copied()
        .collect();
    rows.extend(&classes.minority);
    rows.shuffle(&mut rng);
    Ok(TrainSet::new(train.select_rows(&rows)))
}

/// Appends copies of minority rows (drawn with replacement) until the classes
/// are the same size.
pub fn oversample_minority(train: &TrainSet, seed: u64) -> Result<TrainSet> {
    let classes = split_classes(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deficit = classes.majority.len() - classes.minority.len();
    let mut rows: Vec<usize> = (0..train.n_rows()).collect();
    rows.extend((0..deficit).map(|_| *classes.minority.choose(&mut rng).expect("non-empty")));
    Ok(TrainSet::new(train.select_rows(&rows)))
}

/// Imputed original-unit values and their standardized copy.
struct Geometry {
    original: Array2<f64>,
    scaled: Array2<f64>,
}

impl Geometry {
    fn new(data: &Dataset) -> Geometry {
        let original = Imputer::fit(&data.x).transform(&data.x).expect("same width");
        let scaled = ScalerParams::fit(&original).transform(&original).expect("same width");
        Geometry { original, scaled }
    }

    fn distance2(&self, a: usize, b: usize) -> f64 {
        self.scaled
            .row(a)
            .iter()
            .zip(self.scaled.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    /// The `k` nearest rows to `from` among `candidates`, excluding `from`.
    /// Ties break by row index.
    fn neighbors(&self, from: usize, candidates: &[usize], k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = candidates
            .iter()
            .filter(|&&c| c != from)
            .map(|&c| (self.distance2(from, c), c))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.into_iter().map(|(_, c)| c).collect()
    }
}

/// Generates `count` rows interpolated between a random seed and one of its `k`
/// nearest minority neighbors.
fn synthesize(
    train: &TrainSet,
    geometry: &Geometry,
    classes: &Classes,
    seeds: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (TrainSet, Vec<SyntheticOrigin>) {
    let count = classes.majority.len() - classes.minority.len();
    let neighbor_lists: Vec<Vec<usize>> = seeds
        .iter()
        .map(|&s| geometry.neighbors(s, &classes.minority, k))
        .collect();
    let p = train.n_features();
    let mut synthetic = Array2::zeros((count, p));
    let mut origins = Vec::with_capacity(count);
    for mut out_row in synthetic.axis_iter_mut(Axis(0)) {
        let which = rng.gen_range(0..seeds.len());
        let base = seeds[which];
        let neighbors = &neighbor_lists[which];
        // A lone minority point can only reproduce itself.
        let neighbor = if neighbors.is_empty() {
            base
        } else {
            neighbors[rng.gen_range(0..neighbors.len())]
        };
        let lambda: f64 = rng.gen();
        let a = geometry.original.row(base);
        let b = geometry.original.row(neighbor);
        for j in 0..p {
            out_row[j] = a[j] + lambda * (b[j] - a[j]);
        }
        origins.push(SyntheticOrigin { base, neighbor, lambda });
    }
    let x = ndarray::concatenate(Axis(0), &[train.x.view(), synthetic.view()]).expect("same width");
    let mut y = train.y.clone();
    y.extend(std::iter::repeat_n(classes.minority_label, count));
    let mut weights = train.weights.clone();
    let mean_minority_weight =
        classes.minority.iter().map(|&i| train.weights[i]).sum::<f64>() / classes.minority.len() as f64;
    weights.extend(std::iter::repeat_n(mean_minority_weight, count));
    let data = Dataset {
        x,
        y,
        weights,
        feature_names: train.feature_names.clone(),
    };
    (TrainSet::new(data), origins)
}

fn clamp_k(k: usize, minority: usize) -> Result<usize> {
    if minority < 2 {
        return Err(Error::InvalidData(format!(
            "SMOTE needs at least two minority rows, found {minority}"
        )));
    }
    Ok(k.min(minority - 1).max(1))
}

/// Plain SMOTE: every minority row may seed synthesis.
pub fn smote(train: &TrainSet, k: usize, seed: u64) -> Result<(TrainSet, ResampleReport)> {
    let classes = split_classes(train)?;
    let k = clamp_k(k, classes.minority.len())?;
    let geometry = Geometry::new(train);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = classes.minority.clone();
    let (out, synthetic) = synthesize(train, &geometry, &classes, &seeds, k, &mut rng);
    Ok((
        out,
        ResampleReport {
            seeds,
            synthetic,
            ..Default::default()
        },
    ))
}

/// Minority rows whose `k` nearest neighbors (all classes) are at least half
/// but not entirely majority.
pub fn danger_set(train: &Dataset, k: usize) -> Result<Vec<usize>> {
    let classes = split_classes(train)?;
    let geometry = Geometry::new(train);
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let k = k.min(train.n_rows() - 1).max(1);
    Ok(danger_set_with(&geometry, &classes, &all, k, train))
}

fn danger_set_with(geometry: &Geometry, classes: &Classes, all: &[usize], k: usize, train: &Dataset) -> Vec<usize> {
    classes
        .minority
        .iter()
        .copied()
        .filter(|&i| {
            let nn = geometry.neighbors(i, all, k);
            let majority = nn.iter().filter(|&&j| train.y[j] != classes.minority_label).count();
            2 * majority >= nn.len() && majority < nn.len()
        })
        .collect()
}

/// Borderline-SMOTE-1: only danger rows seed synthesis. Falls back to plain
/// SMOTE when the danger set is empty.
pub fn borderline_smote(train: &TrainSet, k: usize, seed: u64) -> Result<(TrainSet, ResampleReport)> {
    let classes = split_classes(train)?;
    let k_min = clamp_k(k, classes.minority.len())?;
    let geometry = Geometry::new(train);
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let k_all = k.min(train.n_rows() - 1).max(1);
    let seeds = danger_set_with(&geometry, &classes, &all, k_all, train);
    if seeds.is_empty() {
        log::warn!("borderline SMOTE found no danger points, falling back to plain SMOTE");
        let (out, mut report) = smote(train, k, seed)?;
        report
            .notes
            .push("no danger points; fell back to plain SMOTE".to_string());
        return Ok((out, report));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (out, synthetic) = synthesize(train, &geometry, &classes, &seeds, k_min, &mut rng);
    Ok((
        out,
        ResampleReport {
            seeds,
            synthetic,
            ..Default::default()
        },
    ))
}

pub const SVM_EPOCHS: usize = 200;
pub const SVM_C: f64 = 1.0;

/// Linear soft-margin SVM by full-batch subgradient descent (Pegasos step
/// schedule) on `lambda/2 |w|^2 + mean_i c_i * hinge_i`, with balanced class
/// weights `c_i` and the bias folded in as a regularized constant feature.
pub fn fit_linear_svm(x: &Array2<f64>, y: &[u8], c: f64, epochs: usize) -> LinearSvm {
    let n = x.nrows();
    let p = x.ncols();
    let lambda = 1.0 / (c * n as f64);
    let n_bad = y.iter().filter(|&&v| v == 1).count().max(1) as f64;
    let n_good = (n as f64 - n_bad).max(1.0);
    let class_w = |label: u8| {
        if label == 1 {
            n as f64 / (2.0 * n_bad)
        } else {
            n as f64 / (2.0 * n_good)
        }
    };
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut w = Array1::<f64>::zeros(p + 1);
    let objective = |w: &Array1<f64>| {
        let mut loss = 0.0;
        for i in 0..n {
            let f = w[p] + x.row(i).dot(&w.slice(ndarray::s![..p]));
            loss += class_w(y[i]) * (1.0 - signs[i] * f).max(0.0);
        }
        0.5 * lambda * w.dot(w) + loss / n as f64
    };
    let mut best = (objective(&w), w.clone());
    for t in 1..=epochs {
        let eta = 1.0 / (lambda * (t as f64 + 1.0));
        let mut grad = &w * lambda;
        for i in 0..n {
            let row = x.row(i);
            let f = w[p] + row.dot(&w.slice(ndarray::s![..p]));
            if signs[i] * f < 1.0 {
                let scale = class_w(y[i]) * signs[i] / n as f64;
                for j in 0..p {
                    grad[j] -= scale * row[j];
                }
                grad[p] -= scale;
            }
        }
        w = &w - &(grad * eta);
        let radius = 1.0 / lambda.sqrt();
        let norm = w.dot(&w).sqrt();
        if norm > radius {
            w *= radius / norm;
        }
        let obj = objective(&w);
        if obj < best.0 {
            best = (obj, w.clone());
        }
    }
    let w = best.1;
    LinearSvm {
        weights: w.slice(ndarray::s![..p]).to_vec(),
        bias: w[p],
    }
}

/// SVM-SMOTE: minority rows inside the margin band (`y * f(x) <= 1`) seed
/// synthesis. When no minority row is inside the band, the minority rows
/// closest to the hyperplane are used.
pub fn svm_smote(train: &TrainSet, k: usize, seed: u64) -> Result<(TrainSet, ResampleReport)> {
    let classes = split_classes(train)?;
    let geometry = Geometry::new(train);
    let svm = fit_linear_svm(&geometry.scaled, &train.y, SVM_C, SVM_EPOCHS);
    let sign = if classes.minority_label == 1 { 1.0 } else { -1.0 };
    let margins: Vec<(usize, f64)> = classes
        .minority
        .iter()
        .map(|&i| (i, sign * svm.decision(geometry.scaled.row(i).as_slice().expect("standard layout"))))
        .collect();
    let min_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let band = min_margin.max(1.0);
    let seeds: Vec<usize> = margins.iter().filter(|m| m.1 <= band).map(|m| m.0).collect();

    let mut notes = Vec::new();
    if min_margin > 1.0 {
        notes.push("no minority support vectors; seeding from the closest minority rows".to_string());
    }
    let all_sv = (0..train.n_rows()).all(|i| {
        let s = if train.y[i] == 1 { 1.0 } else { -1.0 };
        s * svm.decision(geometry.scaled.row(i).as_slice().expect("standard layout")) <= 1.0
    });
    if all_sv {
        notes.push("degenerate SVM: every row is a support vector".to_string());
    }

    if classes.majority.len() == classes.minority.len() {
        return Ok((
            train.clone(),
            ResampleReport {
                seeds,
                svm: Some(svm),
                notes,
                ..Default::default()
            },
        ));
    }
    let k = if classes.minority.len() < 2 {
        1
    } else {
        clamp_k(k, classes.minority.len())?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (out, synthetic) = synthesize(train, &geometry, &classes, &seeds, k, &mut rng);
    Ok((
        out,
        ResampleReport {
            seeds,
            synthetic,
            svm: Some(svm),
            notes,
            ..Default::default()
        },
    ))
}
