//! Gradient boosting on weighted cross-entropy, with plain depth-wise trees or
//! oblivious (symmetric) trees.
//!
//! Each round fits a tree to the loss gradients at the current margins and
//! sets every leaf to one damped Newton step `-G / (H + l2)`. The ensemble adds
//! leaves scaled by the learning rate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, newton_score, BinnedFeatures, Histogram, Stats, DEFAULT_MAX_BINS};
use super::tree::{EnsembleKind, Node, NodeKind, ObliviousLevel, RegressionTree, TreeEnsemble};
use super::{clamp_probability, logit, sigmoid};
use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};

pub const ORDERED_BLOCKS: usize = 8;
pub const MAX_OBLIVIOUS_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 damping of the Newton leaf step.
    pub l2: f64,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
    /// Share of training rows held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub min_rows_leaf: usize,
    pub max_bins: usize,
    /// Oblivious boosting only: per-row gradients from permutation-prefix models.
    pub ordered: bool,
}

impl BoostingConfig {
    pub fn gradient_boosting() -> Self {
        BoostingConfig {
            n_rounds: 500,
            learning_rate: 0.05,
            max_depth: 3,
            l2: 1.0,
            patience: 20,
            validation_fraction: 0.1,
            min_rows_leaf: 1,
            max_bins: DEFAULT_MAX_BINS,
            ordered: false,
        }
    }

    pub fn oblivious() -> Self {
        BoostingConfig {
            max_depth: 6,
            ..Self::gradient_boosting()
        }
    }

    fn validate(&self, oblivious: bool) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation fraction must be in [0, 0.5]".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::InvalidArgument("l2 must be non-negative".into()));
        }
        if oblivious && self.max_depth > MAX_OBLIVIOUS_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "oblivious depth {} exceeds {MAX_OBLIVIOUS_DEPTH}",
                self.max_depth
            )));
        }
        Ok(())
    }
}

/// Per-round record of a boosting run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostingTrace {
    /// Gradients of the first round, `w * (p0 - y)`.
    pub initial_gradients: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_rounds: usize,
    pub stopped_early: bool,
    pub ordered: bool,
}

/// Weighted mean cross-entropy with probabilities clamped to `[1e-9, 1 - 1e-9]`.
pub fn log_loss(y: &[u8], weights: &[f64], margins: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut wsum = 0.0;
    for ((&yi, &w), &m) in y.iter().zip(weights).zip(margins) {
        let p = clamp_probability(sigmoid(m));
        total -= w * if yi == 1 { p.ln() } else { (1.0 - p).ln() };
        wsum += w;
    }
    total / wsum
}

/// Gradient and hessian of the weighted cross-entropy with respect to the
/// margin: `g = w (p - y)`, `h = w p (1 - p)`.
pub fn logistic_gradients(y: &[u8], weights: &[f64], margins: &[f64]) -> (Vec<f64>, Vec<f64>) {
    y.iter()
        .zip(weights)
        .zip(margins)
        .map(|((&yi, &w), &m)| {
            let p = sigmoid(m);
            (w * (p - yi as f64), w * p * (1.0 - p))
        })
        .unzip()
}

/// Log-odds of the weighted positive rate, clamped.
pub fn prior_margin(y: &[u8], weights: &[f64]) -> f64 {
    let wsum: f64 = weights.iter().sum();
    let pos: f64 = y.iter().zip(weights).filter(|(&v, _)| v == 1).map(|(_, &w)| w).sum();
    logit(clamp_probability(pos / wsum))
}

/// Stratified holdout of `fraction` of the rows for early stopping. Returns
/// `(fit_rows, validation_rows)`; validation is empty when it would lack a class.
fn early_stopping_split(data: &Dataset, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..data.n_rows()).collect();
    if fraction <= 0.0 {
        return (all, Vec::new());
    }
    let mut fit = Vec::new();
    let mut valid = Vec::new();
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = all.iter().copied().filter(|&i| data.y[i] == class).collect();
        rows.shuffle(rng);
        let n_valid = (rows.len() as f64 * fraction).round() as usize;
        if n_valid == 0 || n_valid >= rows.len() {
            return (all, Vec::new());
        }
        valid.extend_from_slice(&rows[..n_valid]);
        fit.extend_from_slice(&rows[n_valid..]);
    }
    fit.sort_unstable();
    valid.sort_unstable();
    (fit, valid)
}

pub fn fit_gradient_boosting(train: &TrainSet, config: &BoostingConfig, seed: u64) -> Result<TreeEnsemble> {
    Ok(boost(train, config, seed, false)?.0)
}

pub fn fit_gradient_boosting_traced(
    train: &TrainSet,
    config: &BoostingConfig,
    seed: u64,
) -> Result<(TreeEnsemble, BoostingTrace)> {
    boost(train, config, seed, false)
}

pub fn fit_oblivious_boosting(train: &TrainSet, config: &BoostingConfig, seed: u64) -> Result<TreeEnsemble> {
    Ok(boost(train, config, seed, true)?.0)
}

pub fn fit_oblivious_boosting_traced(
    train: &TrainSet,
    config: &BoostingConfig,
    seed: u64,
) -> Result<(TreeEnsemble, BoostingTrace)> {
    boost(train, config, seed, true)
}

fn boost(train: &TrainSet, config: &BoostingConfig, seed: u64, oblivious: bool) -> Result<(TreeEnsemble, BoostingTrace)> {
    config.validate(oblivious)?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyDataset("no training rows".into()));
    }
    let data = train.data();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_score = prior_margin(&data.y, &data.weights);
    let kind = if oblivious {
        EnsembleKind::ObliviousBoosting
    } else {
        EnsembleKind::GradientBoosting
    };
    let mut ensemble = TreeEnsemble {
        kind,
        base_score,
        learning_rate: config.learning_rate,
        trees: Vec::new(),
        feature_names: data.feature_names.clone(),
    };
    let mut trace = BoostingTrace {
        ordered: oblivious && config.ordered,
        ..Default::default()
    };
    let all_margins = vec![base_score; data.n_rows()];
    trace.initial_gradients = logistic_gradients(&data.y, &data.weights, &all_margins).0;
    if !data.has_both_classes() {
        // Constant target: the prior already is the best constant.
        return Ok((ensemble, trace));
    }

    let (fit_rows, valid_rows) = early_stopping_split(data, config.validation_fraction, &mut rng);
    let fit = data.select_rows(&fit_rows);
    let valid = data.select_rows(&valid_rows);
    let binned = BinnedFeatures::new(&fit.x, config.max_bins);
    let n = fit.n_rows();
    let all_rows: Vec<usize> = (0..n).collect();
    let features: Vec<usize> = (0..fit.n_features()).collect();

    let mut margins = vec![base_score; n];
    let mut valid_margins = vec![base_score; valid.n_rows()];
    let mut ordered = if oblivious && config.ordered {
        Some(OrderedState::new(n, base_score, &mut rng))
    } else {
        None
    };

    let mut best_loss = f64::INFINITY;
    let mut best_rounds = 0;
    let mut since_best = 0;
    for _round in 0..config.n_rounds {
        let (grad, hess) = match &ordered {
            Some(state) => state.gradients(&fit),
            None => logistic_gradients(&fit.y, &fit.weights, &margins),
        };
        let stats: Vec<Stats> = (0..n)
            .map(|i| Stats {
                a: grad[i],
                b: hess[i],
                w: fit.weights[i],
                n: 1,
            })
            .collect();

        let tree = if oblivious {
            let (levels, leaf_of) = grow_oblivious(&binned, &stats, config.max_depth, config.l2);
            if let Some(state) = ordered.as_mut() {
                state.update(&fit, &leaf_of, levels.len(), config);
            }
            // Final leaf values use every row's gradient at the full model.
            let (g, h) = logistic_gradients(&fit.y, &fit.weights, &margins);
            let n_leaves = 1usize << levels.len();
            let mut leaf_stats = vec![Stats::default(); n_leaves];
            for i in 0..n {
                leaf_stats[leaf_of[i]].add(&Stats {
                    a: g[i],
                    b: h[i],
                    w: fit.weights[i],
                    n: 1,
                });
            }
            let values: Vec<f64> = leaf_stats.iter().map(|s| newton_leaf(s, config.l2)).collect();
            let covers: Vec<f64> = leaf_stats.iter().map(|s| s.w).collect();
            RegressionTree::oblivious(levels, &values, &covers)?
        } else {
            let mut nodes = Vec::new();
            grow_plain(
                &binned,
                &stats,
                &features,
                all_rows.clone(),
                0,
                config,
                &mut nodes,
            );
            RegressionTree { nodes, levels: None }
        };

        for i in 0..n {
            margins[i] += config.learning_rate * tree.predict_row(fit.x.row(i).as_slice().expect("standard layout"));
        }
        for i in 0..valid.n_rows() {
            valid_margins[i] +=
                config.learning_rate * tree.predict_row(valid.x.row(i).as_slice().expect("standard layout"));
        }
        ensemble.trees.push(tree);
        trace.train_loss.push(log_loss(&fit.y, &fit.weights, &margins));

        if valid.n_rows() > 0 {
            let loss = log_loss(&valid.y, &valid.weights, &valid_margins);
            trace.validation_loss.push(loss);
            if loss < best_loss - 1e-12 {
                best_loss = loss;
                best_rounds = ensemble.trees.len();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience.max(1) {
                    trace.stopped_early = true;
                    break;
                }
            }
        }
    }
    if valid.n_rows() > 0 {
        ensemble.trees.truncate(best_rounds);
    }
    trace.best_rounds = ensemble.trees.len();
    Ok((ensemble, trace))
}

fn newton_leaf(s: &Stats, l2: f64) -> f64 {
    if s.n == 0 || s.b + l2 <= 0.0 {
        return 0.0;
    }
    -s.a / (s.b + l2)
}

fn grow_plain(
    binned: &BinnedFeatures,
    stats: &[Stats],
    features: &[usize],
    rows: Vec<usize>,
    depth: usize,
    config: &BoostingConfig,
    nodes: &mut Vec<Node>,
) -> usize {
    let total = rows.iter().fold(Stats::default(), |acc, &r| acc.plus(&stats[r]));
    let idx = nodes.len();
    nodes.push(Node::leaf(newton_leaf(&total, config.l2), total.w));
    if depth >= config.max_depth || rows.len() < 2 * config.min_rows_leaf.max(1) {
        return idx;
    }
    let l2 = config.l2;
    let Some(split) = best_split(binned, features, &rows, stats, config.min_rows_leaf.max(1), |s| {
        newton_score(s, l2)
    }) else {
        return idx;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| binned.goes_left(r, split.feature, split.bin, split.missing_left));
    let left = grow_plain(binned, stats, features, left_rows, depth + 1, config, nodes);
    let right = grow_plain(binned, stats, features, right_rows, depth + 1, config, nodes);
    nodes[idx].kind = NodeKind::Split {
        feature: split.feature,
        threshold: binned.thresholds[split.feature][split.bin],
        left,
        right,
        missing_left: split.missing_left,
    };
    idx
}

/// Chooses one `(feature, threshold)` per level, maximizing the gain summed
/// over all current leaves. Returns the levels and each row's leaf index.
fn grow_oblivious(binned: &BinnedFeatures, stats: &[Stats], depth: usize, l2: f64) -> (Vec<ObliviousLevel>, Vec<usize>) {
    let n = stats.len();
    let mut leaf_of = vec![0usize; n];
    let mut levels = Vec::new();
    for level in 0..depth {
        let n_leaves = 1usize << level;
        let mut best: Option<(f64, usize, usize, bool)> = None;
        for f in 0..binned.n_features() {
            let nb = binned.n_bins(f);
            if nb < 2 {
                continue;
            }
            // One histogram per current leaf.
            let mut hists: Vec<Histogram> = (0..n_leaves)
                .map(|_| Histogram {
                    bins: vec![Stats::default(); nb],
                    missing: Stats::default(),
                })
                .collect();
            let col = &binned.bins[f];
            for i in 0..n {
                let h = &mut hists[leaf_of[i]];
                let b = col[i];
                if b == super::split::MISSING_BIN {
                    h.missing.add(&stats[i]);
                } else {
                    h.bins[b as usize].add(&stats[i]);
                }
            }
            let leaf_totals: Vec<Stats> = hists
                .iter()
                .map(|h| h.bins.iter().fold(h.missing, |acc, s| acc.plus(s)))
                .collect();
            let parent_score: f64 = leaf_totals.iter().map(|s| newton_score(s, l2)).sum();
            let nm_total: Stats = hists
                .iter()
                .flat_map(|h| h.bins.iter())
                .fold(Stats::default(), |acc, s| acc.plus(s));
            let mut cum: Vec<Stats> = vec![Stats::default(); n_leaves];
            let mut cum_all = Stats::default();
            for b in 0..nb - 1 {
                for (leaf, h) in hists.iter().enumerate() {
                    cum[leaf].add(&h.bins[b]);
                    cum_all.add(&h.bins[b]);
                }
                let missing_left = cum_all.w >= nm_total.w - cum_all.w;
                let mut score = 0.0;
                for leaf in 0..n_leaves {
                    let nm_leaf = leaf_totals[leaf].sub(&hists[leaf].missing);
                    let (left, right) = if missing_left {
                        (cum[leaf].plus(&hists[leaf].missing), nm_leaf.sub(&cum[leaf]))
                    } else {
                        (cum[leaf], nm_leaf.sub(&cum[leaf]).plus(&hists[leaf].missing))
                    };
                    score += newton_score(&left, l2) + newton_score(&right, l2);
                }
                let gain = score - parent_score;
                if best.is_none_or(|(g, ..)| gain > g + 1e-12) {
                    best = Some((gain, f, b, missing_left));
                }
            }
        }
        let Some((gain, feature, bin, missing_left)) = best else {
            break;
        };
        if !(gain > 1e-12) {
            break;
        }
        for i in 0..n {
            let right = !binned.goes_left(i, feature, bin, missing_left);
            leaf_of[i] = (leaf_of[i] << 1) | right as usize;
        }
        levels.push(ObliviousLevel {
            feature,
            threshold: binned.thresholds[feature][bin],
            missing_left,
        });
    }
    (levels, leaf_of)
}

/// Margins of the permutation-prefix models used by ordered boosting.
///
/// Rows are split into blocks along a random permutation. The gradient of a
/// row in block `b` is taken from prefix model `b`, which has only been fitted
/// on rows of blocks `0..b`.
struct OrderedState {
    block_of: Vec<usize>,
    /// `prefix_margins[k][i]`: margin of prefix model `k` at row `i`.
    prefix_margins: Vec<Vec<f64>>,
}

impl OrderedState {
    fn new(n: usize, base: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut block_of = vec![0; n];
        for (pos, &row) in perm.iter().enumerate() {
            block_of[row] = pos * ORDERED_BLOCKS / n;
        }
        OrderedState {
            block_of,
            prefix_margins: vec![vec![base; n]; ORDERED_BLOCKS],
        }
    }

    fn gradients(&self, fit: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let margins: Vec<f64> = (0..fit.n_rows())
            .map(|i| self.prefix_margins[self.block_of[i]][i])
            .collect();
        logistic_gradients(&fit.y, &fit.weights, &margins)
    }

    /// Refits the leaf values of every prefix model on its own rows.
    fn update(&mut self, fit: &Dataset, leaf_of: &[usize], depth: usize, config: &BoostingConfig) {
        let n_leaves = 1usize << depth;
        for k in 1..ORDERED_BLOCKS {
            let (g, h) = logistic_gradients(&fit.y, &fit.weights, &self.prefix_margins[k]);
            let mut leaf_stats = vec![Stats::default(); n_leaves];
            for i in 0..fit.n_rows() {
                if self.block_of[i] < k {
                    leaf_stats[leaf_of[i]].add(&Stats {
                        a: g[i],
                        b: h[i],
                        w: fit.weights[i],
                        n: 1,
                    });
                }
            }
            let values: Vec<f64> = leaf_stats.iter().map(|s| newton_leaf(s, config.l2)).collect();
            for i in 0..fit.n_rows() {
                self.prefix_margins[k][i] += config.learning_rate * values[leaf_of[i]];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;

    fn train(x: Array2<f64>, y: Vec<u8>) -> TrainSet {
        let names = (0..x.ncols()).map(|i| format!("f{i}")).collect();
        TrainSet::without_holdout(Dataset::new(x, y, names).unwrap())
    }

    fn no_early_stop(mut c: BoostingConfig, rounds: usize) -> BoostingConfig {
        c.validation_fraction = 0.0;
        c.n_rounds = rounds;
        c
    }

    fn two_feature_data(n: usize, seed: u64) -> TrainSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 4));
        let mut y = vec![0u8; n];
        for i in 0..n {
            for j in 0..4 {
                x[[i, j]] = rng.gen_range(-1.0..1.0);
            }
            let logit = 3.0 * (x[[i, 0]] > 0.0) as u8 as f64 + 2.0 * (x[[i, 1]] > 0.3) as u8 as f64 - 2.5;
            y[i] = (rng.gen::<f64>() < sigmoid(logit)) as u8;
        }
        train(x, y)
    }

    #[test]
    fn constant_target_adds_no_trees() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let (e, trace) = fit_gradient_boosting_traced(&train(x, vec![1; 10]), &BoostingConfig::gradient_boosting(), 0).unwrap();
        assert!(e.trees.is_empty());
        assert_eq!(e.base_score, logit(1.0 - 1e-9));
        assert_eq!(trace.best_rounds, 0);
    }

    #[test]
    fn step_function_loss_decreases_every_round() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
        let y: Vec<u8> = (0..40).map(|i| (i >= 25) as u8).collect();
        let cfg = no_early_stop(BoostingConfig::gradient_boosting(), 100);
        let (_, trace) = fit_gradient_boosting_traced(&train(x, y), &cfg, 0).unwrap();
        for w in trace.train_loss.windows(2) {
            if w[0] < 1e-6 {
                break;
            }
            assert!(w[1] < w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn first_round_gradients_are_p0_minus_y() {
        let t = two_feature_data(200, 4);
        let (_, trace) = fit_gradient_boosting_traced(&t, &BoostingConfig::gradient_boosting(), 1).unwrap();
        let p0 = t.y.iter().map(|&v| v as f64).sum::<f64>() / 200.0;
        for (g, &y) in trace.initial_gradients.iter().zip(&t.y) {
            assert_abs_diff_eq!(*g, p0 - y as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_two_oblivious_uses_both_informative_features() {
        let t = two_feature_data(400, 5);
        let mut cfg = no_early_stop(BoostingConfig::oblivious(), 1);
        cfg.max_depth = 2;
        let e = fit_oblivious_boosting(&t, &cfg, 0).unwrap();
        let tree = &e.trees[0];
        let levels = tree.levels.as_ref().unwrap();
        assert_eq!(levels.len(), 2);
        let mut feats: Vec<usize> = levels.iter().map(|l| l.feature).collect();
        feats.sort();
        assert_eq!(feats, vec![0, 1]);
        assert_eq!(tree.n_leaves(), 4);
        tree.validate().unwrap();
    }

    #[test]
    fn oblivious_fits_no_better_than_plain_trees() {
        let t = two_feature_data(300, 6);
        let mut plain = no_early_stop(BoostingConfig::gradient_boosting(), 30);
        plain.max_depth = 3;
        let mut obl = plain.clone();
        obl.max_depth = 3;
        let (_, tp) = fit_gradient_boosting_traced(&t, &plain, 0).unwrap();
        let (_, to) = fit_oblivious_boosting_traced(&t, &obl, 0).unwrap();
        assert!(to.train_loss.last().unwrap() >= tp.train_loss.last().unwrap());
    }

    #[test]
    fn every_level_has_one_split() {
        let t = two_feature_data(300, 7);
        for ordered in [false, true] {
            let mut cfg = no_early_stop(BoostingConfig::oblivious(), 15);
            cfg.ordered = ordered;
            let e = fit_oblivious_boosting(&t, &cfg, 3).unwrap();
            e.validate().unwrap();
            assert!(e.trees.iter().all(|t| t.is_oblivious()));
        }
    }

    #[test]
    fn ordered_mode_differs_and_learns() {
        let t = two_feature_data(400, 8);
        let mut cfg = no_early_stop(BoostingConfig::oblivious(), 40);
        let plain = fit_oblivious_boosting(&t, &cfg, 3).unwrap();
        cfg.ordered = true;
        let (ordered, trace) = fit_oblivious_boosting_traced(&t, &cfg, 3).unwrap();
        assert!(trace.ordered);
        assert_ne!(plain, ordered);
        assert!(trace.train_loss.last().unwrap() < &trace.train_loss[0]);
    }

    #[test]
    fn depth_over_sixteen_is_rejected() {
        let t = two_feature_data(50, 9);
        let mut cfg = BoostingConfig::oblivious();
        cfg.max_depth = 17;
        assert!(fit_oblivious_boosting(&t, &cfg, 0).is_err());
    }

    #[test]
    fn early_stopping_truncates_to_best_round() {
        let t = two_feature_data(300, 10);
        let mut cfg = BoostingConfig::gradient_boosting();
        cfg.learning_rate = 0.5;
        cfg.patience = 5;
        let (e, trace) = fit_gradient_boosting_traced(&t, &cfg, 2).unwrap();
        assert!(trace.stopped_early);
        let best = trace
            .validation_loss
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(e.trees.len(), best + 1);
    }

    #[test]
    fn missing_values_route_to_larger_child() {
        let mut x = Array2::from_shape_fn((60, 1), |(i, _)| i as f64);
        for i in 0..5 {
            x[[i * 7, 0]] = f64::NAN;
        }
        let y: Vec<u8> = (0..60).map(|i| (i >= 45) as u8).collect();
        let cfg = no_early_stop(BoostingConfig::gradient_boosting(), 5);
        let e = fit_gradient_boosting(&train(x, y), &cfg, 0).unwrap();
        e.validate().unwrap();
        let root = &e.trees[0].nodes[0];
        if let NodeKind::Split { left, right, missing_left, .. } = root.kind {
            let nodes = &e.trees[0].nodes;
            assert_eq!(missing_left, nodes[left].cover >= nodes[right].cover);
        } else {
            panic!("root did not split");
        }
    }
}
