//! Pipeline configuration: a JSON object with flat dotted keys.
//!
//! ```json
//! { "data.dir": "fixture", "seed": 7, "model.kind": "oblivious_boosting",
//!   "resampling.strategy": "smote", "selection.correlation_threshold": 0.95 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, WindowSpec};
use crate::ingest::DEFAULT_HORIZON_DAYS;
use crate::models::mlp::Activation;
use crate::models::{ModelKind, TrainConfig};
use crate::resampling::{ResamplingKind, ResamplingStrategy};
use crate::selection::PruneConfig;

use super::grid::{FeatureSet, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub horizon_days: i64,
    pub features: FeatureConfig,
    pub drop_inactive: bool,
    pub prune: PruneConfig,
    pub top_k: usize,
    pub resampling: ResamplingKind,
    pub k_neighbors: usize,
    pub model: ModelKind,
    pub train: TrainConfig,
    pub k_folds: usize,
    pub train_fraction: f64,
    pub threshold: f64,
    pub grid_models: Option<Vec<ModelKind>>,
    pub grid_resamplers: Option<Vec<ResamplingKind>>,
    pub grid_feature_sets: Vec<FeatureSet>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            seed: None,
            horizon_days: DEFAULT_HORIZON_DAYS,
            features: FeatureConfig::default(),
            drop_inactive: false,
            prune: PruneConfig::default(),
            top_k: 20,
            resampling: ResamplingKind::None,
            k_neighbors: 5,
            model: ModelKind::ObliviousBoosting,
            train: TrainConfig::default(),
            k_folds: 5,
            train_fraction: 0.75,
            threshold: 0.5,
            grid_models: None,
            grid_resamplers: None,
            grid_feature_sets: vec![FeatureSet::Full, FeatureSet::TopK(20)],
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Config(format!("`{key}` must be a number, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::Config(format!("`{key}` must be a non-negative integer, got {v}")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("`{key}` must be true or false, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("`{key}` must be a string, got {v}")))
}

fn as_list<'a>(key: &str, v: &'a Value) -> Result<Vec<&'a str>> {
    match v {
        Value::String(s) => Ok(s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()),
        Value::Array(items) => items.iter().map(|i| as_str(key, i)).collect(),
        _ => Err(Error::Config(format!("`{key}` must be a list of strings, got {v}"))),
    }
}

fn parse_window(s: &str) -> Result<WindowSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("window `{s}` must look like `label:lo:hi`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[1].parse().map_err(|_| bad())?;
    let hi = parts[2].parse().map_err(|_| bad())?;
    WindowSpec::new(parts[0], lo, hi).map_err(|e| Error::Config(e.to_string()))
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        _ => Err(Error::Config(format!("unknown activation `{s}`"))),
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
    }
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let mut config = PipelineConfig::default();
        config.apply_all(&map)?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn apply_all(&mut self, map: &Map<String, Value>) -> Result<()> {
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override. The value is read as JSON when it
    /// parses, otherwise as a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` must look like key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), &value)
    }

    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let t = &mut self.train;
        match key {
            "data.dir" => self.data_dir = Some(PathBuf::from(as_str(key, v)?)),
            "output.dir" => self.out_dir = PathBuf::from(as_str(key, v)?),
            "seed" => {
                self.seed = Some(
                    v.as_u64()
                        .ok_or_else(|| Error::Config(format!("`seed` must be a non-negative integer, got {v}")))?,
                )
            }
            "ingest.horizon_days" => self.horizon_days = as_usize(key, v)? as i64,
            "features.windows" => {
                self.features.windows = as_list(key, v)?.into_iter().map(parse_window).collect::<Result<_>>()?
            }
            "features.drop_inactive" => self.drop_inactive = as_bool(key, v)?,
            "selection.correlation_threshold" => self.prune.correlation_threshold = as_f64(key, v)?,
            "selection.missing_threshold" => self.prune.missing_threshold = as_f64(key, v)?,
            "selection.zero_as_missing" => self.prune.treat_zero_as_missing = as_bool(key, v)?,
            "selection.top_k" => self.top_k = as_usize(key, v)?,
            "resampling.strategy" => self.resampling = as_str(key, v)?.parse()?,
            "resampling.k_neighbors" => self.k_neighbors = as_usize(key, v)?,
            "model.kind" => self.model = as_str(key, v)?.parse()?,
            "logistic.ridge" => t.logistic.ridge = as_f64(key, v)?,
            "logistic.max_iter" => t.logistic.max_iter = as_usize(key, v)?,
            "logistic.n_bins" => t.n_bins = as_usize(key, v)?,
            "forest.n_trees" => t.forest.n_trees = as_usize(key, v)?,
            "forest.min_leaf" => t.forest.min_leaf = as_usize(key, v)?,
            "forest.max_depth" => t.forest.max_depth = Some(as_usize(key, v)?),
            "gradient_boosting.n_rounds" => t.gradient_boosting.n_rounds = as_usize(key, v)?,
            "gradient_boosting.learning_rate" => t.gradient_boosting.learning_rate = as_f64(key, v)?,
            "gradient_boosting.max_depth" => t.gradient_boosting.max_depth = as_usize(key, v)?,
            "gradient_boosting.l2" => t.gradient_boosting.l2 = as_f64(key, v)?,
            "gradient_boosting.patience" => t.gradient_boosting.patience = as_usize(key, v)?,
            "oblivious_boosting.n_rounds" => t.oblivious_boosting.n_rounds = as_usize(key, v)?,
            "oblivious_boosting.learning_rate" => t.oblivious_boosting.learning_rate = as_f64(key, v)?,
            "oblivious_boosting.max_depth" => t.oblivious_boosting.max_depth = as_usize(key, v)?,
            "oblivious_boosting.l2" => t.oblivious_boosting.l2 = as_f64(key, v)?,
            "oblivious_boosting.patience" => t.oblivious_boosting.patience = as_usize(key, v)?,
            "oblivious_boosting.ordered" => t.oblivious_boosting.ordered = as_bool(key, v)?,
            "mlp.hidden" => {
                t.mlp.hidden = match v {
                    Value::Array(items) => items.iter().map(|i| as_usize(key, i)).collect::<Result<_>>()?,
                    _ => return Err(Error::Config(format!("`{key}` must be a list of layer widths"))),
                }
            }
            "mlp.activation" => t.mlp.activation = parse_activation(as_str(key, v)?)?,
            "mlp.learning_rate" => t.mlp.learning_rate = as_f64(key, v)?,
            "mlp.epochs" => t.mlp.epochs = as_usize(key, v)?,
            "mlp.batch_size" => t.mlp.batch_size = as_usize(key, v)?,
            "eval.k" => self.k_folds = as_usize(key, v)?,
            "eval.train_fraction" => self.train_fraction = as_f64(key, v)?,
            "eval.threshold" => self.threshold = as_f64(key, v)?,
            "grid.models" => {
                self.grid_models = Some(as_list(key, v)?.into_iter().map(str::parse).collect::<Result<_>>()?)
            }
            "grid.resamplers" => {
                self.grid_resamplers = Some(as_list(key, v)?.into_iter().map(str::parse).collect::<Result<_>>()?)
            }
            "grid.feature_sets" => {
                self.grid_feature_sets = as_list(key, v)?.into_iter().map(str::parse).collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Every setting as a flat, sorted key map. This is what gets hashed.
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let t = &self.train;
        let labels = |v: Vec<&str>| Value::Array(v.into_iter().map(|s| json!(s)).collect());
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("data.dir", json!(self.data_dir.as_ref().map(|p| p.display().to_string())));
        put("output.dir", json!(self.out_dir.display().to_string()));
        put("seed", json!(self.seed));
        put("ingest.horizon_days", json!(self.horizon_days));
        put(
            "features.windows",
            labels(
                self.features
                    .windows
                    .iter()
                    .map(|w| format!("{}:{}:{}", w.label, w.lo, w.hi))
                    .collect::<Vec<_>>()
                    .iter()
                    .map(String::as_str)
                    .collect(),
            ),
        );
        put("features.drop_inactive", json!(self.drop_inactive));
        put("selection.correlation_threshold", json!(self.prune.correlation_threshold));
        put("selection.missing_threshold", json!(self.prune.missing_threshold));
        put("selection.zero_as_missing", json!(self.prune.treat_zero_as_missing));
        put("selection.top_k", json!(self.top_k));
        put("resampling.strategy", json!(self.resampling.label()));
        put("resampling.k_neighbors", json!(self.k_neighbors));
        put("model.kind", json!(self.model.label()));
        put("logistic.ridge", json!(t.logistic.ridge));
        put("logistic.max_iter", json!(t.logistic.max_iter));
        put("logistic.n_bins", json!(t.n_bins));
        put("forest.n_trees", json!(t.forest.n_trees));
        put("forest.min_leaf", json!(t.forest.min_leaf));
        put("forest.max_depth", json!(t.forest.max_depth));
        for (prefix, b) in [
            ("gradient_boosting", &t.gradient_boosting),
            ("oblivious_boosting", &t.oblivious_boosting),
        ] {
            put(&format!("{prefix}.n_rounds"), json!(b.n_rounds));
            put(&format!("{prefix}.learning_rate"), json!(b.learning_rate));
            put(&format!("{prefix}.max_depth"), json!(b.max_depth));
            put(&format!("{prefix}.l2"), json!(b.l2));
            put(&format!("{prefix}.patience"), json!(b.patience));
        }
        put("oblivious_boosting.ordered", json!(t.oblivious_boosting.ordered));
        put("mlp.hidden", json!(t.mlp.hidden));
        put("mlp.activation", json!(activation_name(t.mlp.activation)));
        put("mlp.learning_rate", json!(t.mlp.learning_rate));
        put("mlp.epochs", json!(t.mlp.epochs));
        put("mlp.batch_size", json!(t.mlp.batch_size));
        put("eval.k", json!(self.k_folds));
        put("eval.train_fraction", json!(self.train_fraction));
        put("eval.threshold", json!(self.threshold));
        put(
            "grid.models",
            json!(self.grid_models.as_ref().map(|v| v.iter().map(|k| k.label()).collect::<Vec<_>>())),
        );
        put(
            "grid.resamplers",
            json!(self
                .grid_resamplers
                .as_ref()
                .map(|v| v.iter().map(|k| k.label()).collect::<Vec<_>>())),
        );
        put(
            "grid.feature_sets",
            json!(self.grid_feature_sets.iter().map(|f| f.label()).collect::<Vec<_>>()),
        );
        m
    }

    /// Hex SHA-256 of the canonical flat config. The output directory does
    /// not enter the hash, so moving outputs keeps it stable.
    pub fn hash(&self) -> String {
        let mut flat = self.to_flat();
        flat.remove("output.dir");
        let text = serde_json::to_string(&flat).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.seed.is_none() {
            return cfg("a seed is required (`seed` key or --seed)".into());
        }
        if self.features.windows.is_empty() {
            return cfg("at least one feature window is required".into());
        }
        if !(self.prune.correlation_threshold > 0.0 && self.prune.correlation_threshold <= 1.0) {
            return cfg("selection.correlation_threshold must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.prune.missing_threshold) {
            return cfg("selection.missing_threshold must be in [0, 1]".into());
        }
        if self.top_k == 0 {
            return cfg("selection.top_k must be positive".into());
        }
        if self.k_folds < 2 {
            return cfg("eval.k must be at least 2".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return cfg("eval.train_fraction must be in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return cfg("eval.threshold must be in [0, 1]".into());
        }
        if self.k_neighbors == 0 {
            return cfg("resampling.k_neighbors must be positive".into());
        }
        if self.resampling.is_class_weight() && !self.model.uses_weighted_loss() {
            return cfg(format!(
                "`{}` does not fit a weighted loss, so `{}` cannot apply",
                self.model, self.resampling
            ));
        }
        for (name, b) in [
            ("gradient_boosting", &self.train.gradient_boosting),
            ("oblivious_boosting", &self.train.oblivious_boosting),
        ] {
            if !(b.learning_rate > 0.0) || b.n_rounds == 0 || b.l2 < 0.0 {
                return cfg(format!("{name} needs learning_rate > 0, n_rounds > 0 and l2 >= 0"));
            }
        }
        if !(self.train.mlp.learning_rate > 0.0) || self.train.mlp.epochs == 0 || self.train.mlp.batch_size == 0 {
            return cfg("mlp needs learning_rate > 0, epochs > 0 and batch_size > 0".into());
        }
        if self.train.forest.n_trees == 0 {
            return cfg("forest.n_trees must be positive".into());
        }
        if self.train.mlp.hidden.contains(&0) {
            return cfg("mlp.hidden widths must be positive".into());
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), plus the data directory must exist.
    pub fn validate_with_data(&self) -> Result<&Path> {
        self.validate()?;
        let dir = self
            .data_dir
            .as_deref()
            .ok_or_else(|| Error::Config("`data.dir` is required".into()))?;
        if !dir.is_dir() {
            return Err(Error::Config(format!("data directory {} does not exist", dir.display())));
        }
        Ok(dir)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn strategy(&self) -> ResamplingStrategy {
        ResamplingStrategy {
            kind: self.resampling,
            k_neighbors: self.k_neighbors,
            seed: self.seed(),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        match (&self.grid_models, &self.grid_resamplers) {
            (None, None) => GridSpec::table(&self.grid_feature_sets),
            (models, resamplers) => GridSpec::cartesian(
                models.as_deref().unwrap_or(&ModelKind::ALL),
                resamplers.as_deref().unwrap_or(&ResamplingKind::ALL),
                &self.grid_feature_sets,
            ),
        }
    }
}
