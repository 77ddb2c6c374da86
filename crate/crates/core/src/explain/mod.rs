//! Exact Shapley attributions for tree ensembles, in margin space.
//!
//! The value of a coalition `S` is path dependent: at a split on a feature in
//! `S` the row's own branch is taken, otherwise both branches are averaged by
//! their share of the training cover. [`tree_shap`] computes the resulting
//! Shapley values in polynomial time; [`brute_force_shapley`] enumerates every
//! coalition and serves as a reference for small feature counts.

pub mod plots;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::tree::{NodeKind, RegressionTree, TreeEnsemble};

pub use plots::{emit_explanation_data, plot_from_shap, PlotData, PlotKind};

/// Largest feature count accepted by [`brute_force_shapley`].
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// Attribution of one row: `base_value + sum(values) == margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapValues {
    pub base_value: f64,
    pub values: Vec<f64>,
    pub margin: f64,
    pub feature_values: Vec<f64>,
}

impl ShapValues {
    /// `|base_value + sum(values) - margin|`.
    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.values.iter().sum::<f64>() - self.margin).abs()
    }
}

fn check_row(ensemble: &TreeEnsemble, x: &[f64]) -> Result<()> {
    if x.len() != ensemble.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "ensemble has {} features, row has {}",
            ensemble.n_features(),
            x.len()
        )));
    }
    Ok(())
}

/// Coalition values `f_S(x)` of a tree ensemble.
#[derive(Debug, Clone, Copy)]
pub struct CoalitionEvaluator<'a> {
    pub ensemble: &'a TreeEnsemble,
}

impl<'a> CoalitionEvaluator<'a> {
    pub fn new(ensemble: &'a TreeEnsemble) -> Self {
        CoalitionEvaluator { ensemble }
    }

    /// `f_S(x)` with `S = { i : in_coalition[i] }`.
    pub fn value(&self, x: &[f64], in_coalition: &[bool]) -> f64 {
        let e = self.ensemble;
        e.base_score
            + e.learning_rate
                * e.trees
                    .iter()
                    .map(|t| tree_coalition_value(t, 0, x, in_coalition))
                    .sum::<f64>()
    }
}

fn tree_coalition_value(t: &RegressionTree, node: usize, x: &[f64], s: &[bool]) -> f64 {
    match t.nodes[node].kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
            missing_left,
        } => {
            if s[feature] {
                let v = x[feature];
                let go_left = if v.is_nan() { missing_left } else { v <= threshold };
                tree_coalition_value(t, if go_left { left } else { right }, x, s)
            } else {
                t.cover_fraction(node, left) * tree_coalition_value(t, left, x, s)
                    + t.cover_fraction(node, right) * tree_coalition_value(t, right, x, s)
            }
        }
    }
}

/// Shapley values by evaluating all `2^p` coalitions once.
pub fn brute_force_shapley(evaluator: &CoalitionEvaluator<'_>, x: &[f64]) -> Result<ShapValues> {
    let e = evaluator.ensemble;
    check_row(e, x)?;
    let p = e.n_features();
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "brute-force Shapley enumerates 2^p coalitions; p = {p} exceeds {BRUTE_FORCE_MAX_FEATURES}"
        )));
    }
    let n_masks = 1usize << p;
    let mut coalition = vec![false; p];
    let values: Vec<f64> = (0..n_masks)
        .map(|mask| {
            for (i, c) in coalition.iter_mut().enumerate() {
                *c = mask >> i & 1 == 1;
            }
            evaluator.value(x, &coalition)
        })
        .collect();
    // weight[s] = s! (p - s - 1)! / p!
    let weight: Vec<f64> = (0..p)
        .map(|s| {
            let mut w = 1.0 / p as f64;
            for j in 1..=s {
                w *= j as f64 / (p - j) as f64;
            }
            w
        })
        .collect();
    let mut phi = vec![0.0; p];
    for mask in 0..n_masks {
        let size = mask.count_ones() as usize;
        for (i, phi_i) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *phi_i += weight[size] * (values[mask | 1 << i] - values[mask]);
            }
        }
    }
    Ok(ShapValues {
        base_value: values[0],
        values: phi,
        margin: e.margin_row(x),
        feature_values: x.to_vec(),
    })
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one);
            next_one = tmp - path[i].weight * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].weight = path[i].weight * (depth + 1) as f64 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one * (depth + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else if zero != 0.0 {
            total += path[i].weight / zero * (depth + 1) as f64 / (depth - i) as f64;
        }
    }
    total
}

fn tree_shap_recurse(
    t: &RegressionTree,
    node: usize,
    x: &[f64],
    mut path: Vec<PathElement>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
    phi: &mut [f64],
) {
    extend_path(&mut path, zero, one, feature);
    match t.nodes[node].kind {
        NodeKind::Leaf { value } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
        }
        NodeKind::Split {
            feature: split,
            threshold,
            left,
            right,
            missing_left,
        } => {
            let v = x[split];
            let go_left = if v.is_nan() { missing_left } else { v <= threshold };
            let (hot, cold) = if go_left { (left, right) } else { (right, left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            let hot_zero = t.cover_fraction(node, hot) * incoming_zero;
            let cold_zero = t.cover_fraction(node, cold) * incoming_zero;
            // A branch with both fractions zero contributes nothing.
            if hot_zero != 0.0 || incoming_one != 0.0 {
                tree_shap_recurse(t, hot, x, path.clone(), hot_zero, incoming_one, Some(split), phi);
            }
            if cold_zero != 0.0 {
                tree_shap_recurse(t, cold, x, path, cold_zero, 0.0, Some(split), phi);
            }
        }
    }
}

fn check_covers(e: &TreeEnsemble) -> Result<()> {
    for (i, t) in e.trees.iter().enumerate() {
        let bad = t.nodes.iter().any(|n| !n.cover.is_finite() || n.cover < 0.0);
        if bad || (t.nodes.len() > 1 && t.nodes[0].cover <= 0.0) {
            return Err(Error::InvalidData(format!("tree {i} lacks training covers")));
        }
    }
    Ok(())
}

/// Path-dependent TreeSHAP summed over the ensemble.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64]) -> Result<ShapValues> {
    check_row(ensemble, x)?;
    check_covers(ensemble)?;
    Ok(tree_shap_unchecked(ensemble, x))
}

fn tree_shap_unchecked(ensemble: &TreeEnsemble, x: &[f64]) -> ShapValues {
    let mut phi = vec![0.0; ensemble.n_features()];
    let max_depth = ensemble.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    for t in &ensemble.trees {
        let mut tree_phi = vec![0.0; phi.len()];
        tree_shap_recurse(t, 0, x, Vec::with_capacity(max_depth + 2), 1.0, 1.0, None, &mut tree_phi);
        for (a, b) in phi.iter_mut().zip(tree_phi) {
            *a += b;
        }
    }
    for v in &mut phi {
        *v *= ensemble.learning_rate;
    }
    ShapValues {
        base_value: ensemble.expected_margin(),
        values: phi,
        margin: ensemble.margin_row(x),
        feature_values: x.to_vec(),
    }
}

/// SHAP values for every row of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub feature_names: Vec<String>,
    pub base_value: f64,
    /// `rows × features`.
    pub values: Array2<f64>,
    pub margins: Vec<f64>,
    pub features: Array2<f64>,
}

impl ShapMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, r: usize) -> ShapValues {
        ShapValues {
            base_value: self.base_value,
            values: self.values.row(r).to_vec(),
            margin: self.margins[r],
            feature_values: self.features.row(r).to_vec(),
        }
    }

    /// Largest additivity error over all rows.
    pub fn max_additivity_error(&self) -> f64 {
        (0..self.n_rows()).map(|r| self.row(r).additivity_error()).fold(0.0, f64::max)
    }
}

pub fn shap_matrix(ensemble: &TreeEnsemble, x: &Array2<f64>) -> Result<ShapMatrix> {
    if x.ncols() != ensemble.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "ensemble has {} features, matrix has {}",
            ensemble.n_features(),
            x.ncols()
        )));
    }
    check_covers(ensemble)?;
    let rows: Vec<ShapValues> = (0..x.nrows())
        .into_par_iter()
        .map(|r| tree_shap_unchecked(ensemble, &x.row(r).to_vec()))
        .collect();
    let p = ensemble.n_features();
    let mut values = Array2::zeros((x.nrows(), p));
    for (r, s) in rows.iter().enumerate() {
        for (c, v) in s.values.iter().enumerate() {
            values[[r, c]] = *v;
        }
    }
    Ok(ShapMatrix {
        feature_names: ensemble.feature_names.clone(),
        base_value: ensemble.expected_margin(),
        values,
        margins: rows.iter().map(|s| s.margin).collect(),
        features: x.clone(),
    })
}

/// Mean absolute SHAP value per feature and the descending ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub feature_names: Vec<String>,
    pub importance: Vec<f64>,
    /// Feature indices, most important first; ties keep column order.
    pub ranking: Vec<usize>,
}

impl GlobalImportance {
    pub fn from_shap(shap: &ShapMatrix) -> Result<Self> {
        let n = shap.n_rows();
        if n == 0 {
            return Err(Error::EmptyDataset("no rows to aggregate SHAP values over".into()));
        }
        let importance: Vec<f64> = shap
            .values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n as f64)
            .collect();
        let mut ranking: Vec<usize> = (0..importance.len()).collect();
        ranking.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
        Ok(GlobalImportance {
            feature_names: shap.feature_names.clone(),
            importance,
            ranking,
        })
    }

    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking.iter().map(|&i| self.feature_names[i].as_str()).collect()
    }
}

pub fn global_importance(ensemble: &TreeEnsemble, x: &Array2<f64>) -> Result<GlobalImportance> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset("no rows to aggregate SHAP values over".into()));
    }
    GlobalImportance::from_shap(&shap_matrix(ensemble, x)?)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::models::tree::{EnsembleKind, Node};
    use rand::Rng;

    /// Random tree of at most `depth` levels whose covers add up.
    pub fn random_tree(rng: &mut impl Rng, p: usize, depth: usize) -> RegressionTree {
        fn grow(rng: &mut impl Rng, nodes: &mut Vec<Node>, p: usize, depth: usize, cover: f64) -> usize {
            let idx = nodes.len();
            nodes.push(Node::leaf(rng.gen_range(-1.0..1.0), cover));
            if depth == 0 || rng.gen_bool(0.15) {
                return idx;
            }
            let share = rng.gen_range(0.05..0.95);
            let left = grow(rng, nodes, p, depth - 1, cover * share);
            let right = grow(rng, nodes, p, depth - 1, cover - nodes[left].cover);
            nodes[idx].kind = NodeKind::Split {
                feature: rng.gen_range(0..p),
                threshold: rng.gen_range(-1.0..1.0),
                left,
                right,
                missing_left: rng.gen_bool(0.5),
            };
            idx
        }
        let mut nodes = Vec::new();
        let cover = rng.gen_range(50.0..500.0f64).round();
        grow(rng, &mut nodes, p, depth, cover);
        RegressionTree { nodes, levels: None }
    }

    pub fn random_ensemble(rng: &mut impl Rng, p: usize, n_trees: usize, depth: usize) -> TreeEnsemble {
        TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: rng.gen_range(-2.0..0.0),
            learning_rate: rng.gen_range(0.05..1.0),
            trees: (0..n_trees).map(|_| random_tree(rng, p, depth)).collect(),
            feature_names: (0..p).map(|i| format!("f{i}")).collect(),
        }
    }

    /// Shapley values by direct subset enumeration with factorial weights and
    /// a hand-written cover-weighted traversal.
    pub fn naive_shapley(e: &TreeEnsemble, x: &[f64]) -> (f64, Vec<f64>) {
        let p = e.n_features();
        fn expect(nodes: &[Node], i: usize, x: &[f64], known: &[usize]) -> f64 {
            match nodes[i].kind {
                NodeKind::Leaf { value } => value,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    missing_left,
                } => {
                    if known.contains(&feature) {
                        let next = if x[feature].is_nan() {
                            if missing_left {
                                left
                            } else {
                                right
                            }
                        } else if x[feature] <= threshold {
                            left
                        } else {
                            right
                        };
                        expect(nodes, next, x, known)
                    } else {
                        let c = nodes[i].cover;
                        let (wl, wr) = if c > 0.0 {
                            (nodes[left].cover / c, nodes[right].cover / c)
                        } else {
                            (0.5, 0.5)
                        };
                        wl * expect(nodes, left, x, known) + wr * expect(nodes, right, x, known)
                    }
                }
            }
        }
        let f = |known: &[usize]| -> f64 {
            e.base_score + e.learning_rate * e.trees.iter().map(|t| expect(&t.nodes, 0, x, known)).sum::<f64>()
        };
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let mut phi = vec![0.0; p];
        for (i, phi_i) in phi.iter_mut().enumerate() {
            let others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
            for subset_bits in 0..(1u32 << others.len()) {
                let s: Vec<usize> = others
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| subset_bits >> b & 1 == 1)
                    .map(|(_, &j)| j)
                    .collect();
                let mut with_i = s.clone();
                with_i.push(i);
                let w = fact(s.len()) * fact(p - s.len() - 1) / fact(p);
                *phi_i += w * (f(&with_i) - f(&s));
            }
        }
        (f(&[]), phi)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::models::tree::{EnsembleKind, Node};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stump(a: f64, wa: f64, b: f64, wb: f64) -> TreeEnsemble {
        let nodes = vec![
            Node {
                kind: NodeKind::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    missing_left: true,
                },
                cover: wa + wb,
            },
            Node::leaf(a, wa),
            Node::leaf(b, wb),
        ];
        TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: 0.0,
            learning_rate: 1.0,
            trees: vec![RegressionTree { nodes, levels: None }],
            feature_names: vec!["x".into()],
        }
    }

    fn random_row(rng: &mut impl Rng, p: usize) -> Vec<f64> {
        (0..p)
            .map(|_| if rng.gen_bool(0.05) { f64::NAN } else { rng.gen_range(-1.2..1.2) })
            .collect()
    }

    #[test]
    fn stump_attribution() {
        let e = stump(2.0, 30.0, -1.0, 10.0);
        let s = brute_force_shapley(&CoalitionEvaluator::new(&e), &[-0.5]).unwrap();
        let mean = (30.0 * 2.0 + -10.0) / 40.0;
        assert_abs_diff_eq!(s.base_value, mean, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values[0], 2.0 - mean, epsilon = 1e-15);
        let t = tree_shap(&e, &[-0.5]).unwrap();
        assert_abs_diff_eq!(t.values[0], 2.0 - mean, epsilon = 1e-15);
    }

    #[test]
    fn coalition_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random_ensemble(&mut rng, 4, 5, 3);
        let ev = CoalitionEvaluator::new(&e);
        let x = random_row(&mut rng, 4);
        assert_abs_diff_eq!(ev.value(&x, &[true; 4]), e.margin_row(&x), epsilon = 1e-12);
        assert_abs_diff_eq!(ev.value(&x, &[false; 4]), e.expected_margin(), epsilon = 1e-12);
    }

    #[test]
    fn brute_force_matches_naive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let e = random_ensemble(&mut rng, 6, 8, 3);
            for _ in 0..10 {
                let x = random_row(&mut rng, 6);
                let s = brute_force_shapley(&CoalitionEvaluator::new(&e), &x).unwrap();
                let (base, phi) = naive_shapley(&e, &x);
                assert_abs_diff_eq!(s.base_value, base, epsilon = 1e-10);
                for (a, b) in s.values.iter().zip(&phi) {
                    assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn tree_shap_matches_brute_force_and_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = rng.gen_range(1..=8);
            let (n_trees, depth) = (rng.gen_range(1..=20), rng.gen_range(1..=4));
            let e = random_ensemble(&mut rng, p, n_trees, depth);
            for _ in 0..20 {
                let x = random_row(&mut rng, p);
                let t = tree_shap(&e, &x).unwrap();
                let b = brute_force_shapley(&CoalitionEvaluator::new(&e), &x).unwrap();
                assert_abs_diff_eq!(t.base_value, b.base_value, epsilon = 1e-10);
                for (u, v) in t.values.iter().zip(&b.values) {
                    assert_abs_diff_eq!(*u, *v, epsilon = 1e-8);
                }
                assert!(t.additivity_error() < 1e-9);
                assert!(b.additivity_error() < 1e-9);
            }
        }
    }

    #[test]
    fn repeated_features_along_a_path() {
        // Same feature split twice on one path.
        let nodes = vec![
            Node {
                kind: NodeKind::Split { feature: 0, threshold: 0.0, left: 1, right: 4, missing_left: false },
                cover: 10.0,
            },
            Node {
                kind: NodeKind::Split { feature: 0, threshold: -0.5, left: 2, right: 3, missing_left: false },
                cover: 6.0,
            },
            Node::leaf(1.0, 2.0),
            Node::leaf(3.0, 4.0),
            Node {
                kind: NodeKind::Split { feature: 1, threshold: 0.0, left: 5, right: 6, missing_left: false },
                cover: 4.0,
            },
            Node::leaf(-2.0, 0.0),
            Node::leaf(5.0, 4.0),
        ];
        let e = TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: 0.3,
            learning_rate: 0.5,
            trees: vec![RegressionTree { nodes, levels: None }],
            feature_names: vec!["a".into(), "b".into()],
        };
        for x in [[-0.7, 0.2], [-0.2, -0.1], [0.4, -0.3], [0.4, 0.3]] {
            let t = tree_shap(&e, &x).unwrap();
            let (base, phi) = naive_shapley(&e, &x);
            assert_abs_diff_eq!(t.base_value, base, epsilon = 1e-12);
            for (u, v) in t.values.iter().zip(&phi) {
                assert_abs_diff_eq!(*u, *v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn empty_ensemble_and_null_players() {
        let e = TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: -1.5,
            learning_rate: 0.1,
            trees: vec![],
            feature_names: vec!["a".into(), "b".into()],
        };
        let s = tree_shap(&e, &[1.0, 2.0]).unwrap();
        assert_eq!(s.base_value, -1.5);
        assert_eq!(s.values, vec![0.0, 0.0]);

        let mut wide = stump(1.0, 5.0, 0.0, 5.0);
        wide.feature_names.push("unused".into());
        let s = tree_shap(&wide, &[0.3, 9.0]).unwrap();
        assert_eq!(s.values[1], 0.0);
        let b = brute_force_shapley(&CoalitionEvaluator::new(&wide), &[0.3, 9.0]).unwrap();
        assert_eq!(b.values[1], 0.0);
    }

    #[test]
    fn duplicated_trees_double_attributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = random_ensemble(&mut rng, 5, 6, 3);
        let mut twice = e.clone();
        twice.trees.extend(e.trees.clone());
        let x = random_row(&mut rng, 5);
        let a = tree_shap(&e, &x).unwrap();
        let b = tree_shap(&twice, &x).unwrap();
        // Equal up to the rounding of a longer floating-point sum.
        for (u, v) in a.values.iter().zip(&b.values) {
            assert_abs_diff_eq!(2.0 * u, *v, epsilon = 1e-14);
        }
    }

    #[test]
    fn interchangeable_features_share_credit() {
        let mut t1 = stump(1.0, 3.0, -1.0, 7.0);
        let mut t2 = t1.trees[0].clone();
        if let NodeKind::Split { feature, .. } = &mut t2.nodes[0].kind {
            *feature = 1;
        }
        t1.trees.push(t2);
        t1.feature_names.push("copy".into());
        let x = Array2::from_shape_fn((50, 2), |(i, _)| i as f64 / 25.0 - 1.0);
        let g = global_importance(&t1, &x).unwrap();
        assert_abs_diff_eq!(g.importance[0], g.importance[1], epsilon = 1e-8);
    }

    #[test]
    fn too_many_features_for_brute_force() {
        let mut e = stump(1.0, 1.0, 0.0, 1.0);
        e.feature_names = (0..21).map(|i| format!("f{i}")).collect();
        assert!(brute_force_shapley(&CoalitionEvaluator::new(&e), &[0.0; 21]).is_err());
    }

    #[test]
    fn missing_covers_are_rejected() {
        let mut e = stump(1.0, 1.0, 0.0, 1.0);
        for n in &mut e.trees[0].nodes {
            n.cover = 0.0;
        }
        assert!(tree_shap(&e, &[0.0]).is_err());
    }

    #[test]
    fn importance_ranks_the_driving_feature_first() {
        use crate::dataset::{Dataset, TrainSet};
        use crate::models::boosting::{fit_gradient_boosting, BoostingConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((400, 4), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<u8> = (0..400).map(|i| (x[[i, 1]] > 0.2) as u8).collect();
        let d = Dataset::new(x.clone(), y, (0..4).map(|i| format!("f{i}")).collect()).unwrap();
        let mut cfg = BoostingConfig::gradient_boosting();
        cfg.n_rounds = 30;
        let e = fit_gradient_boosting(&TrainSet::without_holdout(d), &cfg, 0).unwrap();
        let g = global_importance(&e, &x).unwrap();
        assert_eq!(g.ranking[0], 1);
        let single = global_importance(&e, &x.slice(ndarray::s![0..1, ..]).to_owned()).unwrap();
        let s = tree_shap(&e, &x.row(0).to_vec()).unwrap();
        for (imp, phi) in single.importance.iter().zip(&s.values) {
            assert_abs_diff_eq!(*imp, phi.abs(), epsilon = 1e-15);
        }
        assert!(global_importance(&e, &Array2::zeros((0, 4))).is_err());
    }

    #[test]
    fn mean_margin_equals_base_plus_mean_attribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = random_ensemble(&mut rng, 5, 10, 4);
        let x = Array2::from_shape_fn((60, 5), |_| rng.gen_range(-1.0..1.0));
        let s = shap_matrix(&e, &x).unwrap();
        let mean_margin = s.margins.iter().sum::<f64>() / 60.0;
        let mean_phi = s.values.sum() / 60.0;
        assert_abs_diff_eq!(mean_margin, s.base_value + mean_phi, epsilon = 1e-9);
        assert!(s.max_additivity_error() < 1e-9);
    }
}
