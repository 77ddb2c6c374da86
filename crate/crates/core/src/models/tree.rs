//! Regression trees with training covers, and additive ensembles of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left; missing follows `missing_left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        missing_left: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    /// Weighted count of training rows reaching the node.
    pub cover: f64,
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Node {
        Node {
            kind: NodeKind::Leaf { value },
            cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// One level of an oblivious tree: every node at this depth uses this split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObliviousLevel {
    pub feature: usize,
    pub threshold: f64,
    pub missing_left: bool,
}

impl ObliviousLevel {
    pub fn goes_left(&self, value: f64) -> bool {
        if value.is_nan() {
            self.missing_left
        } else {
            value <= self.threshold
        }
    }
}

/// Binary regression tree stored as a node arena rooted at index 0.
///
/// Oblivious trees also keep their per-level splits; their node arena is the
/// full expansion with `2^depth` leaves, where leaf `i` (in left-to-right order)
/// has bit `depth - 1 - l` set when level `l` sent the row right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeJson", try_from = "TreeJson")]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub levels: Option<Vec<ObliviousLevel>>,
}

impl RegressionTree {
    pub fn single_leaf(value: f64, cover: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::leaf(value, cover)],
            levels: None,
        }
    }

    pub fn is_oblivious(&self) -> bool {
        self.levels.is_some()
    }

    /// Builds the node arena of an oblivious tree from its levels and the
    /// per-leaf values and covers.
    pub fn oblivious(levels: Vec<ObliviousLevel>, leaf_values: &[f64], leaf_covers: &[f64]) -> Result<Self> {
        let depth = levels.len();
        if depth > 16 {
            return Err(Error::InvalidArgument(format!("oblivious depth {depth} exceeds 16")));
        }
        let n_leaves = 1usize << depth;
        if leaf_values.len() != n_leaves || leaf_covers.len() != n_leaves {
            return Err(Error::SchemaMismatch(format!(
                "oblivious tree of depth {depth} needs {n_leaves} leaves, got {} values and {} covers",
                leaf_values.len(),
                leaf_covers.len()
            )));
        }
        let mut nodes = Vec::with_capacity(2 * n_leaves - 1);
        fn build(
            nodes: &mut Vec<Node>,
            levels: &[ObliviousLevel],
            level: usize,
            prefix: usize,
            values: &[f64],
            covers: &[f64],
        ) -> usize {
            let depth = levels.len();
            let idx = nodes.len();
            if level == depth {
                nodes.push(Node::leaf(values[prefix], covers[prefix]));
                return idx;
            }
            let span = 1usize << (depth - level);
            let first = prefix << (depth - level);
            let cover: f64 = covers[first..first + span].iter().sum();
            nodes.push(Node::leaf(0.0, cover));
            let left = build(nodes, levels, level + 1, prefix << 1, values, covers);
            let right = build(nodes, levels, level + 1, (prefix << 1) | 1, values, covers);
            let l = levels[level];
            nodes[idx].kind = NodeKind::Split {
                feature: l.feature,
                threshold: l.threshold,
                left,
                right,
                missing_left: l.missing_left,
            };
            idx
        }
        build(&mut nodes, &levels, 0, 0, leaf_values, leaf_covers);
        Ok(RegressionTree {
            nodes,
            levels: Some(levels),
        })
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match self.nodes[idx].kind {
                NodeKind::Leaf { .. } => return idx,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    missing_left,
                } => {
                    let v = row[feature];
                    let go_left = if v.is_nan() { missing_left } else { v <= threshold };
                    idx = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Fraction of `parent`'s cover that flows to `child`. A zero-cover parent
    /// splits evenly so that coalition expectations stay defined.
    pub fn cover_fraction(&self, parent: usize, child: usize) -> f64 {
        let pc = self.nodes[parent].cover;
        if pc > 0.0 {
            self.nodes[child].cover / pc
        } else {
            0.5
        }
    }

    /// Cover-weighted mean of leaf values.
    pub fn expected_value(&self) -> f64 {
        fn walk(t: &RegressionTree, i: usize) -> f64 {
            match t.nodes[i].kind {
                NodeKind::Leaf { value } => value,
                NodeKind::Split { left, right, .. } => {
                    t.cover_fraction(i, left) * walk(t, left) + t.cover_fraction(i, right) * walk(t, right)
                }
            }
        }
        walk(self, 0)
    }

    /// Checks arena links, cover additivity and oblivious level structure.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidData(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.cover.is_finite() || n.cover < 0.0 {
                return bad(format!("node {i} has invalid cover {}", n.cover));
            }
            match n.kind {
                NodeKind::Leaf { value } => {
                    if !value.is_finite() {
                        return bad(format!("leaf {i} has non-finite value"));
                    }
                }
                NodeKind::Split { left, right, threshold, .. } => {
                    if left >= self.nodes.len() || right >= self.nodes.len() || left <= i || right <= i {
                        return bad(format!("node {i} has invalid children"));
                    }
                    if threshold.is_nan() {
                        return bad(format!("node {i} has NaN threshold"));
                    }
                    let sum = self.nodes[left].cover + self.nodes[right].cover;
                    if (sum - n.cover).abs() > 1e-9 * n.cover.max(1.0) {
                        return bad(format!("node {i} cover {} != children {}", n.cover, sum));
                    }
                }
            }
        }
        if let Some(levels) = &self.levels {
            let mut frontier = vec![0usize];
            for (l, level) in levels.iter().enumerate() {
                let mut next = Vec::new();
                for &i in &frontier {
                    match self.nodes[i].kind {
                        NodeKind::Split {
                            feature,
                            threshold,
                            left,
                            right,
                            missing_left,
                        } if feature == level.feature
                            && threshold == level.threshold
                            && missing_left == level.missing_left =>
                        {
                            next.push(left);
                            next.push(right);
                        }
                        _ => return bad(format!("oblivious level {l} is not shared by node {i}")),
                    }
                }
                frontier = next;
            }
            if frontier.iter().any(|&i| !self.nodes[i].is_leaf()) {
                return bad("oblivious tree deeper than its levels".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RandomForest,
    GradientBoosting,
    ObliviousBoosting,
}

impl EnsembleKind {
    /// Boosted ensembles output log-odds; forests output a probability.
    pub fn margin_is_log_odds(self) -> bool {
        !matches!(self, EnsembleKind::RandomForest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SplitJson {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    missing_left: bool,
}

/// Interchange form of a tree. Oblivious trees list their levels and one value
/// and cover per leaf; other trees list every node (`null` for leaves) with
/// per-node covers and leaf values (`null` for splits).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeJson {
    oblivious: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<ObliviousLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<Option<SplitJson>>>,
    covers: Vec<f64>,
    leaf_values: Vec<Option<f64>>,
}

impl From<RegressionTree> for TreeJson {
    fn from(t: RegressionTree) -> Self {
        match t.levels {
            Some(levels) => {
                let leaves: Vec<&Node> = t.nodes.iter().filter(|n| n.is_leaf()).collect();
                TreeJson {
                    oblivious: true,
                    levels: Some(levels),
                    nodes: None,
                    covers: leaves.iter().map(|n| n.cover).collect(),
                    leaf_values: leaves
                        .iter()
                        .map(|n| match n.kind {
                            NodeKind::Leaf { value } => Some(value),
                            NodeKind::Split { .. } => None,
                        })
                        .collect(),
                }
            }
            None => TreeJson {
                oblivious: false,
                levels: None,
                nodes: Some(
                    t.nodes
                        .iter()
                        .map(|n| match n.kind {
                            NodeKind::Leaf { .. } => None,
                            NodeKind::Split {
                                feature,
                                threshold,
                                left,
                                right,
                                missing_left,
                            } => Some(SplitJson {
                                feature,
                                threshold,
                                left,
                                right,
                                missing_left,
                            }),
                        })
                        .collect(),
                ),
                covers: t.nodes.iter().map(|n| n.cover).collect(),
                leaf_values: t
                    .nodes
                    .iter()
                    .map(|n| match n.kind {
                        NodeKind::Leaf { value } => Some(value),
                        NodeKind::Split { .. } => None,
                    })
                    .collect(),
            },
        }
    }
}

impl TryFrom<TreeJson> for RegressionTree {
    type Error = Error;

    fn try_from(j: TreeJson) -> Result<Self> {
        let tree = if j.oblivious {
            let levels = j
                .levels
                .ok_or_else(|| Error::InvalidData("oblivious tree without levels".into()))?;
            let values: Option<Vec<f64>> = j.leaf_values.into_iter().collect();
            let values = values.ok_or_else(|| Error::InvalidData("oblivious leaf without a value".into()))?;
            RegressionTree::oblivious(levels, &values, &j.covers)?
        } else {
            let splits = j.nodes.ok_or_else(|| Error::InvalidData("tree without nodes".into()))?;
            if splits.len() != j.covers.len() || splits.len() != j.leaf_values.len() {
                return Err(Error::InvalidData("node, cover and leaf value lists differ in length".into()));
            }
            let nodes = splits
                .into_iter()
                .zip(j.covers)
                .zip(j.leaf_values)
                .map(|((split, cover), value)| {
                    let kind = match (split, value) {
                        (Some(s), None) => NodeKind::Split {
                            feature: s.feature,
                            threshold: s.threshold,
                            left: s.left,
                            right: s.right,
                            missing_left: s.missing_left,
                        },
                        (None, Some(value)) => NodeKind::Leaf { value },
                        _ => return Err(Error::InvalidData("node must be either a split or a leaf".into())),
                    };
                    Ok(Node { kind, cover })
                })
                .collect::<Result<Vec<_>>>()?;
            RegressionTree { nodes, levels: None }
        };
        tree.validate()?;
        Ok(tree)
    }
}

/// Additive tree model: `raw(x) = base_score + learning_rate * sum_t tree_t(x)`.
///
/// For boosted kinds `raw` is a log-odds margin and the probability is its
/// sigmoid. Random forests store `learning_rate = 1 / n_trees` and leaf class
/// fractions, so `raw` is already the averaged probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn proba_from_margin(&self, margin: f64) -> f64 {
        if self.kind.margin_is_log_odds() {
            super::sigmoid(margin)
        } else {
            margin.clamp(0.0, 1.0)
        }
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        self.proba_from_margin(self.margin_row(row))
    }

    /// `base_score + learning_rate * sum_t E[tree_t]`, the SHAP baseline.
    pub fn expected_margin(&self) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.expected_value()).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.trees.iter().enumerate() {
            t.validate().map_err(|e| Error::InvalidData(format!("tree {i}: {e}")))?;
            if let Some(max) = t.split_features().last() {
                if *max >= self.n_features() {
                    return Err(Error::InvalidData(format!(
                        "tree {i} splits on feature {max} but the ensemble has {} features",
                        self.n_features()
                    )));
                }
            }
        }
        Ok(())
    }
}
