//! Bootstrap-bagged classification trees with Gini splits.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{best_split, gini_score, BinnedFeatures, Stats, DEFAULT_MAX_BINS};
use super::tree::{EnsembleKind, Node, NodeKind, RegressionTree, TreeEnsemble};
use crate::dataset::TrainSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// Features tried per node; `None` means `sqrt(p)`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub max_bins: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            min_leaf: 5,
            max_features: None,
            max_depth: None,
            max_bins: DEFAULT_MAX_BINS,
        }
    }
}

pub fn fit_random_forest(train: &TrainSet, config: &ForestConfig, seed: u64) -> Result<TreeEnsemble> {
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::EmptyDataset("no training rows".into()));
    }
    let p = train.n_features();
    let binned = BinnedFeatures::new(&train.x, config.max_bins);
    let mtry = config
        .max_features
        .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1))
        .clamp(1, p.max(1));
    let min_leaf = config.min_leaf.max(1);

    let trees: Vec<RegressionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let n = train.n_rows();
            // Bootstrap multiplicities become row statistics.
            let mut counts = vec![0usize; n];
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
            let stats: Vec<Stats> = (0..n)
                .map(|i| {
                    let w = train.weights[i] * counts[i] as f64;
                    Stats {
                        a: if train.y[i] == 1 { w } else { 0.0 },
                        b: 0.0,
                        w,
                        n: counts[i],
                    }
                })
                .collect();
            let rows: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            let mut builder = Builder {
                binned: &binned,
                stats: &stats,
                mtry,
                min_leaf,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                nodes: Vec::new(),
                rng: &mut rng,
            };
            builder.grow(rows, 0);
            RegressionTree {
                nodes: builder.nodes,
                levels: None,
            }
        })
        .collect();

    Ok(TreeEnsemble {
        kind: EnsembleKind::RandomForest,
        base_score: 0.0,
        learning_rate: 1.0 / config.n_trees as f64,
        trees,
        feature_names: train.feature_names.clone(),
    })
}

struct Builder<'a> {
    binned: &'a BinnedFeatures,
    stats: &'a [Stats],
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<Node>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let total = rows.iter().fold(Stats::default(), |acc, &r| acc.plus(&self.stats[r]));
        let idx = self.nodes.len();
        let value = if total.w > 0.0 { total.a / total.w } else { 0.0 };
        self.nodes.push(Node::leaf(value, total.w));
        let pure = total.a <= 0.0 || total.a >= total.w;
        if pure || depth >= self.max_depth || total.n < 2 * self.min_leaf {
            return idx;
        }
        let p = self.binned.n_features();
        let features = sample(&mut *self.rng, p, self.mtry).into_vec();
        let Some(split) = best_split(self.binned, &features, &rows, self.stats, self.min_leaf, gini_score) else {
            return idx;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.binned.goes_left(r, split.feature, split.bin, split.missing_left));
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[idx].kind = NodeKind::Split {
            feature: split.feature,
            threshold: self.binned.thresholds[split.feature][split.bin],
            left,
            right,
            missing_left: split.missing_left,
        };
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use ndarray::Array2;

    fn train(x: Array2<f64>, y: Vec<u8>) -> TrainSet {
        let names = (0..x.ncols()).map(|i| format!("f{i}")).collect();
        TrainSet::without_holdout(Dataset::new(x, y, names).unwrap())
    }

    #[test]
    fn pure_class_predicts_certainty() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i * 3 + j) as f64);
        let f = fit_random_forest(&train(x.clone(), vec![1; 20]), &ForestConfig { n_trees: 10, ..Default::default() }, 1)
            .unwrap();
        for r in 0..20 {
            assert_eq!(f.predict_proba_row(x.row(r).as_slice().unwrap()), 1.0);
        }
        f.validate().unwrap();
    }

    #[test]
    fn learns_xor() {
        let base = [[0.0, 0.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            for r in base {
                data.extend([r[0], r[1]]);
                y.push(r[2] as u8);
            }
        }
        let x = Array2::from_shape_vec((200, 2), data).unwrap();
        let cfg = ForestConfig {
            n_trees: 50,
            max_features: Some(2),
            ..Default::default()
        };
        let f = fit_random_forest(&train(x.clone(), y.clone()), &cfg, 3).unwrap();
        let correct = (0..200)
            .filter(|&r| (f.predict_proba_row(x.row(r).as_slice().unwrap()) > 0.5) as u8 == y[r])
            .count();
        assert!(correct as f64 / 200.0 > 0.95, "accuracy {}", correct as f64 / 200.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64);
        let y: Vec<u8> = (0..60).map(|i| (i % 3 == 0) as u8).collect();
        let t = train(x, y);
        let cfg = ForestConfig {
            n_trees: 8,
            ..Default::default()
        };
        assert_eq!(fit_random_forest(&t, &cfg, 9).unwrap(), fit_random_forest(&t, &cfg, 9).unwrap());
    }
}
