//! Model families behind one fit/predict interface returning default
//! probabilities.

pub mod boosting;
pub mod forest;
pub mod logistic;
pub mod mlp;
pub(crate) mod split;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainSet;
use crate::error::{Error, Result};
use boosting::BoostingConfig;
use forest::ForestConfig;
use logistic::{Convergence, LogisticConfig, LogisticModel, QuantileBinning};
use mlp::{Activation, InputScaler, Layer, MlpConfig, MlpModel, MlpTrace};
use tree::{EnsembleKind, RegressionTree, TreeEnsemble};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const PROBABILITY_FLOOR: f64 = 1e-9;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Clamps into `[1e-9, 1 - 1e-9]` so log-losses stay finite.
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

/// Hard decision: 1 (bad) iff `p > threshold`.
pub fn classify(p: f64, threshold: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    Ok((p > threshold) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    LogisticBinned,
    RandomForest,
    GradientBoosting,
    ObliviousBoosting,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Logistic,
        ModelKind::LogisticBinned,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::ObliviousBoosting,
        ModelKind::Mlp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LogisticBinned => "logistic_binned",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::ObliviousBoosting => "oblivious_boosting",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Whether fitting minimizes a per-sample weighted loss, so class weights
    /// change the fit. Forests grow on bootstrap counts instead.
    pub fn uses_weighted_loss(self) -> bool {
        !matches!(self, ModelKind::RandomForest)
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(
            self,
            ModelKind::RandomForest | ModelKind::GradientBoosting | ModelKind::ObliviousBoosting
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// Hyperparameters of every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub logistic: LogisticConfig,
    pub n_bins: usize,
    pub forest: ForestConfig,
    pub gradient_boosting: BoostingConfig,
    pub oblivious_boosting: BoostingConfig,
    pub mlp: MlpConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            logistic: LogisticConfig::default(),
            n_bins: 10,
            forest: ForestConfig::default(),
            gradient_boosting: BoostingConfig::gradient_boosting(),
            oblivious_boosting: BoostingConfig::oblivious(),
            mlp: MlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Logistic(LogisticModel),
    Trees(TreeEnsemble),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub fitted: Fitted,
}

pub fn fit_model(kind: ModelKind, train: &TrainSet, config: &TrainConfig, seed: u64) -> Result<Model> {
    let fitted = match kind {
        ModelKind::Logistic => Fitted::Logistic(logistic::fit_logistic(train, &config.logistic)?),
        ModelKind::LogisticBinned => {
            let cfg = LogisticConfig {
                n_bins: Some(config.n_bins),
                ..config.logistic.clone()
            };
            Fitted::Logistic(logistic::fit_logistic(train, &cfg)?)
        }
        ModelKind::RandomForest => Fitted::Trees(forest::fit_random_forest(train, &config.forest, seed)?),
        ModelKind::GradientBoosting => {
            Fitted::Trees(boosting::fit_gradient_boosting(train, &config.gradient_boosting, seed)?)
        }
        ModelKind::ObliviousBoosting => {
            Fitted::Trees(boosting::fit_oblivious_boosting(train, &config.oblivious_boosting, seed)?)
        }
        ModelKind::Mlp => {
            let input = InputScaler::fit(&train.x)?;
            Fitted::Mlp(mlp::fit_mlp(train, &config.mlp, Some(input), seed)?)
        }
    };
    Ok(Model { kind, fitted })
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match &self.fitted {
            Fitted::Logistic(m) => &m.feature_names,
            Fitted::Trees(e) => &e.feature_names,
            Fitted::Mlp(m) => &m.feature_names,
        }
    }

    pub fn tree_ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.fitted {
            Fitted::Trees(e) => Some(e),
            _ => None,
        }
    }

    /// Errors unless `names` equals the training schema.
    pub fn check_schema(&self, names: &[String]) -> Result<()> {
        let expected = self.feature_names();
        if expected.len() != names.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} columns, got {}",
                expected.len(),
                names.len()
            )));
        }
        if let Some((e, g)) = expected.iter().zip(names).find(|(e, g)| e != g) {
            return Err(Error::SchemaMismatch(format!("expected column `{e}`, got `{g}`")));
        }
        Ok(())
    }

    /// Default probabilities for rows of `x`, whose columns must follow the
    /// training order.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names().len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} columns, got {}",
                self.feature_names().len(),
                x.ncols()
            )));
        }
        match &self.fitted {
            Fitted::Logistic(m) => m.predict_proba(x),
            Fitted::Mlp(m) => m.predict_proba(x),
            Fitted::Trees(e) => Ok(tree_margins(e, x).into_iter().map(|m| e.proba_from_margin(m)).collect()),
        }
    }

    pub fn predict_proba_named(&self, x: &Array2<f64>, names: &[String]) -> Result<Vec<f64>> {
        self.check_schema(names)?;
        self.predict_proba(x)
    }

    /// Raw ensemble outputs (log-odds for boosted kinds); `None` for models
    /// that are not tree ensembles.
    pub fn margins(&self, x: &Array2<f64>) -> Result<Option<Vec<f64>>> {
        if x.ncols() != self.feature_names().len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} columns, got {}",
                self.feature_names().len(),
                x.ncols()
            )));
        }
        Ok(self.tree_ensemble().map(|e| tree_margins(e, x)))
    }

    pub fn to_json(&self) -> ModelJson {
        let mut j = ModelJson {
            version: MODEL_FORMAT_VERSION,
            kind: self.kind,
            feature_names: self.feature_names().to_vec(),
            base_score: None,
            learning_rate: None,
            trees: Vec::new(),
            scaler: None,
            binning: None,
            imputer: None,
            design_names: None,
            intercept: None,
            coefficients: None,
            convergence: None,
            activation: None,
            layers: None,
            training: None,
        };
        match &self.fitted {
            Fitted::Trees(e) => {
                j.base_score = Some(e.base_score);
                j.learning_rate = Some(e.learning_rate);
                j.trees = e.trees.clone();
            }
            Fitted::Logistic(m) => {
                j.binning = m.binning.clone();
                j.imputer = m.imputer.clone();
                j.design_names = Some(m.design_names.clone());
                j.intercept = Some(m.intercept);
                j.coefficients = Some(m.coefficients.clone());
                j.convergence = Some(m.convergence);
            }
            Fitted::Mlp(m) => {
                j.scaler = Some(m.input.clone());
                j.activation = Some(m.activation);
                j.layers = Some(m.layers.clone());
                j.training = Some(m.trace.clone());
            }
        }
        j
    }

    pub fn from_json(j: ModelJson) -> Result<Self> {
        if j.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidData(format!("unsupported model format version {}", j.version)));
        }
        let missing = |field: &str| Error::InvalidData(format!("{} model lacks `{field}`", j.kind));
        let fitted = match j.kind {
            ModelKind::RandomForest | ModelKind::GradientBoosting | ModelKind::ObliviousBoosting => {
                let kind = match j.kind {
                    ModelKind::RandomForest => EnsembleKind::RandomForest,
                    ModelKind::GradientBoosting => EnsembleKind::GradientBoosting,
                    _ => EnsembleKind::ObliviousBoosting,
                };
                let e = TreeEnsemble {
                    kind,
                    base_score: j.base_score.ok_or_else(|| missing("base_score"))?,
                    learning_rate: j.learning_rate.ok_or_else(|| missing("learning_rate"))?,
                    trees: j.trees,
                    feature_names: j.feature_names,
                };
                e.validate()?;
                Fitted::Trees(e)
            }
            ModelKind::Logistic | ModelKind::LogisticBinned => Fitted::Logistic(LogisticModel {
                design_names: j.design_names.ok_or_else(|| missing("design_names"))?,
                intercept: j.intercept.ok_or_else(|| missing("intercept"))?,
                coefficients: j.coefficients.ok_or_else(|| missing("coefficients"))?,
                convergence: j.convergence.ok_or_else(|| missing("convergence"))?,
                imputer: j.imputer,
                binning: j.binning,
                feature_names: j.feature_names,
            }),
            ModelKind::Mlp => Fitted::Mlp(MlpModel {
                activation: j.activation.ok_or_else(|| missing("activation"))?,
                layers: j.layers.ok_or_else(|| missing("layers"))?,
                input: j.scaler.ok_or_else(|| missing("scaler"))?,
                trace: j.training.unwrap_or_default(),
                feature_names: j.feature_names,
            }),
        };
        Ok(Model { kind: j.kind, fitted })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_json())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(serde_json::from_str(&text)?)
    }
}

fn tree_margins(e: &TreeEnsemble, x: &Array2<f64>) -> Vec<f64> {
    (0..x.nrows())
        .into_par_iter()
        .map(|r| {
            let row = x.row(r);
            match row.as_slice() {
                Some(s) => e.margin_row(s),
                None => e.margin_row(&row.to_vec()),
            }
        })
        .collect()
}

/// Serialized model. Tree ensembles use `base_score`, `learning_rate` and
/// `trees`; the other fields belong to the logistic and network families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub version: u32,
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub trees: Vec<RegressionTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<InputScaler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<QuantileBinning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imputer: Option<crate::features::Imputer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<Layer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<MlpTrace>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tree::{Node, NodeKind};

    fn data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        for i in (0..n).step_by(9) {
            x[[i, 2]] = f64::NAN;
        }
        let y = (0..n)
            .map(|i| (rng.gen::<f64>() < sigmoid(2.0 * x[[i, 0]] - x[[i, 1]])) as u8)
            .collect();
        Dataset::new(x, y, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    fn small_config() -> TrainConfig {
        let mut c = TrainConfig::default();
        c.forest.n_trees = 20;
        c.gradient_boosting.n_rounds = 30;
        c.oblivious_boosting.n_rounds = 30;
        c.mlp.epochs = 10;
        c.mlp.hidden = vec![6];
        c
    }

    #[test]
    fn classify_uses_strict_threshold() {
        assert_eq!(classify(0.57, 0.5).unwrap(), 1);
        assert_eq!(classify(0.5, 0.5).unwrap(), 0);
        assert_eq!(classify(0.001, 0.5).unwrap(), 0);
        assert!(classify(0.3, 1.5).is_err());
        assert!(classify(0.3, -0.1).is_err());
    }

    #[test]
    fn kinds_round_trip_through_labels() {
        for k in ModelKind::ALL {
            assert_eq!(k.label().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn zero_tree_ensemble_predicts_sigmoid_of_base() {
        let e = TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: -1.3,
            learning_rate: 0.1,
            trees: vec![],
            feature_names: vec!["a".into()],
        };
        let m = Model {
            kind: ModelKind::GradientBoosting,
            fitted: Fitted::Trees(e),
        };
        let x = Array2::from_shape_fn((5, 1), |(i, _)| i as f64);
        for p in m.predict_proba(&x).unwrap() {
            assert_eq!(p, sigmoid(-1.3));
        }
    }

    #[test]
    fn zero_coefficient_logistic_gives_one_half() {
        let m = Model {
            kind: ModelKind::Logistic,
            fitted: Fitted::Logistic(LogisticModel {
                feature_names: vec!["a".into(), "b".into()],
                design_names: vec!["a".into(), "b".into()],
                intercept: 0.0,
                coefficients: vec![0.0, 0.0],
                imputer: None,
                binning: None,
                convergence: Convergence {
                    converged: true,
                    iterations: 0,
                    gradient_norm: 0.0,
                    separated: false,
                },
            }),
        };
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i * 10 + j) as f64);
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn zero_leaf_tree_leaves_predictions_unchanged() {
        let d = data(200, 1);
        let t = TrainSet::without_holdout(d.clone());
        let mut m = fit_model(ModelKind::GradientBoosting, &t, &small_config(), 1).unwrap();
        let before = m.predict_proba(&d.x).unwrap();
        if let Fitted::Trees(e) = &mut m.fitted {
            let mut extra = e.trees[0].clone();
            for n in &mut extra.nodes {
                if let NodeKind::Leaf { value } = &mut n.kind {
                    *value = 0.0;
                }
            }
            e.trees.push(extra);
        }
        assert_eq!(before, m.predict_proba(&d.x).unwrap());
    }

    /// Walks each tree by hand, independent of the ensemble code.
    fn oracle_margin(trees: &[Vec<Node>], base: f64, lr: f64, row: &[f64]) -> f64 {
        let mut sum = 0.0;
        for nodes in trees {
            let mut i = 0;
            loop {
                match nodes[i].kind {
                    NodeKind::Leaf { value } => {
                        sum += value;
                        break;
                    }
                    NodeKind::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        missing_left,
                    } => {
                        let v = row[feature];
                        let go_left = if v.is_nan() { missing_left } else { v <= threshold };
                        i = if go_left { left } else { right };
                    }
                }
            }
        }
        base + lr * sum
    }

    #[test]
    fn ensemble_predictions_match_tree_walk() {
        let d = data(300, 2);
        let t = TrainSet::without_holdout(d.clone());
        for kind in [ModelKind::GradientBoosting, ModelKind::ObliviousBoosting] {
            let m = fit_model(kind, &t, &small_config(), 4).unwrap();
            let e = m.tree_ensemble().unwrap();
            let trees: Vec<Vec<Node>> = e.trees.iter().map(|t| t.nodes.clone()).collect();
            let p = m.predict_proba(&d.x).unwrap();
            for r in 0..d.n_rows() {
                let row = d.x.row(r).to_vec();
                let margin = oracle_margin(&trees, e.base_score, e.learning_rate, &row);
                let expected = 1.0 / (1.0 + (-margin).exp());
                assert!((p[r] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_family_round_trips_bit_for_bit() {
        let d = data(300, 3);
        let t = TrainSet::without_holdout(d.clone());
        let probe = data(100, 99).x;
        let dir = tempfile::tempdir().unwrap();
        for kind in ModelKind::ALL {
            let m = fit_model(kind, &t, &small_config(), 7).unwrap();
            let path = dir.path().join(format!("{kind}.json"));
            m.save(&path).unwrap();
            let loaded = Model::load(&path).unwrap();
            let a = m.predict_proba(&probe).unwrap();
            let b = loaded.predict_proba(&probe).unwrap();
            assert!(
                a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()),
                "{kind} predictions changed after reload"
            );
            assert!(a.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let d = data(100, 5);
        let t = TrainSet::without_holdout(d.clone());
        let m = fit_model(ModelKind::Logistic, &t, &small_config(), 0).unwrap();
        let wrong = Array2::zeros((3, 2));
        assert!(matches!(m.predict_proba(&wrong), Err(Error::SchemaMismatch(_))));
        let names = vec!["a".to_string(), "c".into(), "b".into()];
        assert!(m.predict_proba_named(&d.x, &names).is_err());
    }

    #[test]
    fn oblivious_json_lists_levels() {
        let d = data(200, 6);
        let t = TrainSet::without_holdout(d);
        let m = fit_model(ModelKind::ObliviousBoosting, &t, &small_config(), 0).unwrap();
        let v = serde_json::to_value(m.to_json()).unwrap();
        let tree = &v["trees"][0];
        assert_eq!(tree["oblivious"], true);
        let depth = tree["levels"].as_array().unwrap().len();
        assert_eq!(tree["leaf_values"].as_array().unwrap().len(), 1 << depth);
        assert!(v.get("base_score").is_some() && v.get("learning_rate").is_some());
    }
}
