//! Pipeline stages and the artifacts they leave on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Axis;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};
use crate::explain::{emit_explanation_data, plot_from_shap, shap_matrix, GlobalImportance, PlotData, PlotKind};
use crate::features::{build_feature_matrix_with, drop_inactive_accounts, FeatureMatrix};
use crate::ingest::{join_bundle_with_horizon, validate_bundle, LedgerBundle, SanityReport, SourceTables};
use crate::metrics::{confusion_matrix, cross_validate, roc_auc, split_indices, ConfusionMatrix, EvalReport, RocPoint};
use crate::models::{classify, fit_model, Model, ModelJson, ModelKind};
use crate::resampling::resample;
use crate::selection::{prune, SelectionReport};

use super::config::PipelineConfig;
use super::grid::{run_grid, GridOptions, GridReport};

/// JSON wrapper recording which configuration and seed produced a payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub artifact: String,
    pub config_hash: String,
    pub seed: u64,
    pub payload: T,
}

/// Writes artifacts as `<name>.partial` and renames them on [`commit`].
/// After a failed run the `.partial` files stay behind, marking output that
/// belongs to no complete run.
///
/// [`commit`]: ArtifactWriter::commit
pub struct ArtifactWriter {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    pending: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>, config_hash: &str, seed: u64) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ArtifactWriter {
            dir,
            config_hash: config_hash.to_string(),
            seed,
            pending: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let partial = partial_path(&target);
        std::fs::write(&partial, bytes).map_err(|e| Error::io(&partial, e))?;
        self.pending.push(target);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<()> {
        let artifact = Artifact {
            artifact: name.trim_end_matches(".json").to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            payload,
        };
        let mut text = serde_json::to_string_pretty(&artifact)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Text artifact headed by a `#` comment line with hash and seed.
    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# config_hash={} seed={}\n{body}", self.config_hash, self.seed);
        self.put(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<()> {
        let text = format!("<!-- config_hash={} seed={} -->\n{svg}", self.config_hash, self.seed);
        self.put(name, text.as_bytes())
    }

    pub fn plot(&mut self, stem: &str, plot: &PlotData) -> Result<()> {
        self.json(&format!("{stem}.json"), plot)?;
        self.text(&format!("{stem}.csv"), &plot.to_csv())?;
        self.svg(&format!("{stem}.svg"), &plot.to_svg())
    }

    /// Renames every pending artifact into place and returns the final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        for target in &self.pending {
            let partial = partial_path(target);
            std::fs::rename(&partial, target).map_err(|e| Error::io(target, e))?;
        }
        Ok(self.pending)
    }
}

fn partial_path(target: &Path) -> PathBuf {
    let mut s = target.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Reads the payload of a JSON artifact.
pub fn read_artifact<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Artifact<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseType {
    TruePositive,
    TrueNegative,
    FalsePositive,
    FalseNegative,
}

impl CaseType {
    pub const ALL: [CaseType; 4] = [
        CaseType::TruePositive,
        CaseType::TrueNegative,
        CaseType::FalsePositive,
        CaseType::FalseNegative,
    ];

    /// Bad (label 1) is the positive class.
    pub fn of(predicted: u8, actual: u8) -> Self {
        match (predicted, actual) {
            (1, 1) => CaseType::TruePositive,
            (0, 0) => CaseType::TrueNegative,
            (1, _) => CaseType::FalsePositive,
            _ => CaseType::FalseNegative,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CaseType::TruePositive => "true positive",
            CaseType::TrueNegative => "true negative",
            CaseType::FalsePositive => "false positive",
            CaseType::FalseNegative => "false negative",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            CaseType::TruePositive => "true_positive",
            CaseType::TrueNegative => "true_negative",
            CaseType::FalsePositive => "false_positive",
            CaseType::FalseNegative => "false_negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountExplanation {
    pub row_id: String,
    pub label: u8,
    pub probability: f64,
    pub threshold: f64,
    pub case: CaseType,
    pub case_label: String,
    pub plot: PlotData,
}

/// Waterfall of one account, labeled as a confusion-matrix case at
/// `threshold`. The model must be a tree ensemble.
pub fn explain_account(model: &Model, matrix: &FeatureMatrix, row_id: &str, threshold: f64) -> Result<AccountExplanation> {
    let ensemble = model
        .tree_ensemble()
        .ok_or_else(|| Error::InvalidArgument(format!("cannot compute tree SHAP for a {} model", model.kind)))?;
    let row = matrix
        .row_index(row_id)
        .ok_or_else(|| Error::InvalidData(format!("unknown row id `{row_id}`")))?;
    let sub = matrix.select_named(model.feature_names())?;
    let x = sub.values.select(Axis(0), &[row]);
    let probability = model.predict_proba(&x)?[0];
    let label = matrix.labels[row];
    let case = CaseType::of(classify(probability, threshold)?, label);
    let plot = emit_explanation_data(&PlotKind::Waterfall { row: 0 }, ensemble, &x)?;
    Ok(AccountExplanation {
        row_id: row_id.to_string(),
        label,
        probability,
        threshold,
        case,
        case_label: case.label().to_string(),
        plot,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub threshold: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub gini: f64,
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cv: EvalReport,
    pub holdout: HoldoutReport,
}

/// A fitted model and the split it was fit on.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanations {
    /// The model the SHAP values describe. Differs from the trained model
    /// when that one is not a tree ensemble.
    pub explained_model: String,
    pub importance: GlobalImportance,
    #[serde(skip)]
    pub summary: Option<PlotData>,
    #[serde(skip)]
    pub dependence: Option<PlotData>,
    #[serde(skip)]
    pub cases: Vec<AccountExplanation>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    hash: String,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Pipeline { config, hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn seed(&self) -> u64 {
        self.config.seed()
    }

    pub fn writer(&self) -> Result<ArtifactWriter> {
        ArtifactWriter::new(&self.config.out_dir, &self.hash, self.seed())
    }

    pub fn ingest(&self) -> Result<(LedgerBundle, SanityReport)> {
        let dir = self.config.validate_with_data()?;
        let run = || {
            let t = SourceTables::load_dir(dir)?;
            let bundle = join_bundle_with_horizon(t.clients, t.accounts, t.transactions, t.outcomes, self.config.horizon_days)?;
            let report = validate_bundle(&bundle);
            for w in &report.warnings {
                log::warn!("{w}");
            }
            Ok((bundle, report))
        };
        run().map_err(|e: Error| e.in_stage("ingest"))
    }

    pub fn featurize(&self, bundle: &LedgerBundle) -> Result<FeatureMatrix> {
        let run = || {
            let m = build_feature_matrix_with(bundle, &self.config.features)?;
            if self.config.drop_inactive {
                drop_inactive_accounts(&m, &self.config.features)
            } else {
                Ok(m)
            }
        };
        run().map_err(|e| e.in_stage("featurize"))
    }

    pub fn select(&self, matrix: &FeatureMatrix) -> Result<(FeatureMatrix, SelectionReport)> {
        prune(matrix, &self.config.prune).map_err(|e| e.in_stage("select"))
    }

    fn split(&self, selected: &FeatureMatrix) -> Result<(Dataset, Vec<usize>, Vec<usize>)> {
        let data = Dataset::from_matrix(selected);
        let (train_rows, test_rows) = split_indices(&data, self.config.train_fraction, self.seed(), true)?;
        Ok((data, train_rows, test_rows))
    }

    pub fn train(&self, selected: &FeatureMatrix) -> Result<Trained> {
        let run = || {
            let (data, train_rows, test_rows) = self.split(selected)?;
            let train = TrainSet::without_holdout(data.select_rows(&train_rows));
            let (train, _) = resample(&train, &self.config.strategy())?;
            let model = fit_model(self.config.model, &train, &self.config.train, self.seed())?;
            Ok(Trained {
                model,
                train_rows,
                test_rows,
            })
        };
        run().map_err(|e: Error| e.in_stage("train"))
    }

    /// Reuses `model.json` from the output directory when it was written
    /// under the same configuration hash; otherwise trains.
    pub fn train_or_load(&self, selected: &FeatureMatrix) -> Result<Trained> {
        let path = self.config.out_dir.join("model.json");
        if let Ok(a) = read_artifact::<ModelJson>(&path) {
            if a.config_hash == self.hash {
                let model = Model::from_json(a.payload).map_err(|e| e.in_stage("train"))?;
                let (_, train_rows, test_rows) = self.split(selected).map_err(|e| e.in_stage("train"))?;
                log::info!("reusing {}", path.display());
                return Ok(Trained {
                    model,
                    train_rows,
                    test_rows,
                });
            }
        }
        self.train(selected)
    }

    pub fn evaluate(&self, selected: &FeatureMatrix, trained: &Trained) -> Result<Evaluation> {
        let run = || {
            let data = Dataset::from_matrix(selected);
            let cv = cross_validate(
                self.config.model,
                &self.config.train,
                &self.config.strategy(),
                &data,
                self.config.k_folds,
                self.seed(),
            )?;
            let test = data.select_rows(&trained.test_rows);
            let p = trained.model.predict_proba_named(&test.x, &test.feature_names)?;
            let predicted = p
                .iter()
                .map(|&pi| classify(pi, self.config.threshold))
                .collect::<Result<Vec<u8>>>()?;
            let confusion = confusion_matrix(&test.y, &predicted)?;
            let roc = roc_auc(&test.y, &p)?;
            Ok(Evaluation {
                cv: cv.to_report("full"),
                holdout: HoldoutReport {
                    threshold: self.config.threshold,
                    n_train: trained.train_rows.len(),
                    n_test: trained.test_rows.len(),
                    tpr: confusion.tpr(),
                    fpr: confusion.fpr(),
                    confusion,
                    auc: roc.auc,
                    gini: roc.gini,
                    roc: roc.points,
                },
            })
        };
        run().map_err(|e: Error| e.in_stage("evaluate"))
    }

    /// SHAP artifacts over the test rows: global importance, a summary plot,
    /// a dependence plot of the top feature, and one waterfall for each
    /// confusion-matrix case that occurs.
    pub fn explain(&self, selected: &FeatureMatrix, trained: &Trained) -> Result<Explanations> {
        let run = || {
            let benchmark;
            let model = if trained.model.tree_ensemble().is_some() {
                &trained.model
            } else {
                let data = Dataset::from_matrix(selected);
                let train = TrainSet::without_holdout(data.select_rows(&trained.train_rows));
                benchmark = fit_model(ModelKind::ObliviousBoosting, &train, &self.config.train, self.seed())?;
                &benchmark
            };
            let ensemble = model.tree_ensemble().expect("tree model");
            let test = selected.select_rows(&trained.test_rows);
            let x = test.select_named(model.feature_names())?.values;
            let shap = shap_matrix(ensemble, &x)?;
            let importance = GlobalImportance::from_shap(&shap)?;
            let summary = plot_from_shap(&PlotKind::Summary, ensemble, &shap)?;
            let ranked = importance.ranked_names();
            let dependence = plot_from_shap(
                &PlotKind::Dependence {
                    feature: ranked[0].to_string(),
                    color_feature: ranked.get(1).unwrap_or(&ranked[0]).to_string(),
                },
                ensemble,
                &shap,
            )?;
            // Cases follow the trained model's predictions.
            let p = trained.model.predict_proba_named(&x, model.feature_names())?;
            let mut cases = Vec::new();
            for case in CaseType::ALL {
                let hit = (0..test.n_rows())
                    .find(|&r| classify(p[r], self.config.threshold).ok().map(|c| CaseType::of(c, test.labels[r])) == Some(case));
                if let Some(r) = hit {
                    let mut e = explain_account(model, &test, &test.row_ids[r], self.config.threshold)?;
                    e.probability = p[r];
                    e.case = case;
                    e.case_label = case.label().into();
                    cases.push(e);
                }
            }
            Ok(Explanations {
                explained_model: model.kind.label().to_string(),
                importance,
                summary: Some(summary),
                dependence: Some(dependence),
                cases,
            })
        };
        run().map_err(|e: Error| e.in_stage("explain"))
    }

    pub fn grid(&self, selected: &FeatureMatrix) -> Result<GridReport> {
        let options = GridOptions {
            train: self.config.train.clone(),
            k: self.config.k_folds,
            k_neighbors: self.config.k_neighbors,
            seed: self.seed(),
        };
        run_grid(&self.config.grid_spec(), selected, &options).map_err(|e| e.in_stage("grid"))
    }
}

pub fn write_sanity(w: &mut ArtifactWriter, report: &SanityReport) -> Result<()> {
    w.json("sanity.json", report)
}

pub fn write_features(w: &mut ArtifactWriter, matrix: &FeatureMatrix) -> Result<()> {
    w.json("features.json", &matrix.to_json())?;
    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    w.text("features.csv", &String::from_utf8_lossy(&csv))
}

pub fn write_selection(w: &mut ArtifactWriter, report: &SelectionReport) -> Result<()> {
    w.json("selection.json", report)?;
    w.text("selection.txt", &report.to_string())
}

pub fn write_model(w: &mut ArtifactWriter, trained: &Trained) -> Result<()> {
    w.json("model.json", &trained.model.to_json())
}

pub fn write_evaluation(w: &mut ArtifactWriter, evaluation: &Evaluation) -> Result<()> {
    w.json("evaluation.json", evaluation)
}

pub fn write_explanations(w: &mut ArtifactWriter, ex: &Explanations) -> Result<()> {
    w.json("importance.json", ex)?;
    if let Some(p) = &ex.summary {
        w.plot("plots/summary", p)?;
    }
    if let Some(p) = &ex.dependence {
        w.plot("plots/dependence", p)?;
    }
    for case in &ex.cases {
        write_account(w, &format!("plots/waterfall_{}", case.case.slug()), case)?;
    }
    Ok(())
}

pub fn write_account(w: &mut ArtifactWriter, stem: &str, e: &AccountExplanation) -> Result<()> {
    w.json(&format!("{stem}.json"), e)?;
    w.svg(&format!("{stem}.svg"), &e.plot.to_svg())
}

pub fn write_grid(w: &mut ArtifactWriter, grid: &GridReport) -> Result<()> {
    w.text("grid.csv", &grid.to_csv()?)?;
    w.text("grid.txt", &grid.to_text())?;
    w.json("grid.json", grid)
}

/// Every stage in order. Artifacts become visible only when all stages
/// succeed; a failure leaves `.partial` files and names the stage.
pub fn run_pipeline(config: PipelineConfig) -> Result<Vec<PathBuf>> {
    let p = Pipeline::new(config)?;
    p.config.validate_with_data()?;
    let mut w = p.writer()?;
    let (bundle, sanity) = p.ingest()?;
    write_sanity(&mut w, &sanity)?;
    let features = p.featurize(&bundle)?;
    write_features(&mut w, &features)?;
    let (selected, selection) = p.select(&features)?;
    write_selection(&mut w, &selection)?;
    let trained = p.train(&selected)?;
    write_model(&mut w, &trained)?;
    let evaluation = p.evaluate(&selected, &trained)?;
    write_evaluation(&mut w, &evaluation)?;
    let explanations = p.explain(&selected, &trained)?;
    write_explanations(&mut w, &explanations)?;
    let mut files = w.commit()?;
    files.extend(write_report(&p.config.out_dir)?);
    Ok(files)
}

fn payload(dir: &Path, name: &str) -> Option<(Value, String, u64)> {
    let a = read_artifact::<Value>(dir.join(name)).ok()?;
    Some((a.payload, a.config_hash, a.seed))
}

/// Plain-text digest of whatever artifacts exist in `dir`.
pub fn render_report(dir: &Path) -> Result<String> {
    let mut out = String::new();
    let mut any = false;
    let mut provenance = None;
    if let Some((s, hash, seed)) = payload(dir, "sanity.json") {
        any = true;
        provenance.get_or_insert((hash, seed));
        let _ = writeln!(
            out,
            "accounts: {} labeled ({} good, {} bad), {} transactions",
            s["n_outcomes"], s["n_good"], s["n_bad"], s["n_transactions"]
        );
    }
    if let Some((s, hash, seed)) = payload(dir, "selection.json") {
        any = true;
        provenance.get_or_insert((hash, seed));
        let count = |v: &Value| v.as_array().map_or(0, Vec::len);
        let _ = writeln!(
            out,
            "features: {} generated, {} kept, {} removed",
            count(&s["original"]),
            count(&s["surviving"]),
            count(&s["removed"])
        );
    }
    if let Some((e, hash, seed)) = payload(dir, "evaluation.json") {
        any = true;
        provenance.get_or_insert((hash, seed));
        let cv = &e["cv"];
        let h = &e["holdout"];
        let _ = writeln!(
            out,
            "model: {} with resampling {}",
            cv["model"].as_str().unwrap_or("?"),
            cv["resampling"].as_str().unwrap_or("?")
        );
        let folds = cv["folds"].as_array().map_or(0, Vec::len);
        let _ = writeln!(
            out,
            "cross-validated gini: {:.2} ({:.2}) over {folds} folds",
            cv["mean"].as_f64().unwrap_or(f64::NAN),
            cv["std"].as_f64().unwrap_or(f64::NAN)
        );
        let c = &h["confusion"];
        let _ = writeln!(
            out,
            "holdout: auc {:.4}, gini {:.4}; TP {} FP {} TN {} FN {} at threshold {}",
            h["auc"].as_f64().unwrap_or(f64::NAN),
            h["gini"].as_f64().unwrap_or(f64::NAN),
            c["tp"],
            c["fp"],
            c["tn"],
            c["fn"],
            h["threshold"]
        );
    }
    if let Some((ex, hash, seed)) = payload(dir, "importance.json") {
        any = true;
        provenance.get_or_insert((hash, seed));
        let imp = &ex["importance"];
        if let (Some(names), Some(values), Some(ranking)) = (
            imp["feature_names"].as_array(),
            imp["importance"].as_array(),
            imp["ranking"].as_array(),
        ) {
            let _ = writeln!(out, "top features by mean |SHAP| ({}):", ex["explained_model"].as_str().unwrap_or("?"));
            for i in ranking.iter().take(10).filter_map(Value::as_u64) {
                let i = i as usize;
                let _ = writeln!(
                    out,
                    "  {:<32} {:.4}",
                    names[i].as_str().unwrap_or("?"),
                    values[i].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
    }
    if let Ok(text) = std::fs::read_to_string(dir.join("grid.txt")) {
        any = true;
        out.push_str("grid:\n");
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let _ = writeln!(out, "  {line}");
        }
    }
    if !any {
        return Err(Error::InvalidData(format!("no artifacts found in {}", dir.display())));
    }
    let (hash, seed) = provenance.unwrap_or_default();
    Ok(format!("config_hash: {hash}\nseed: {seed}\n{out}"))
}

/// Writes `report.txt` next to the artifacts it summarizes.
pub fn write_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let text = render_report(dir)?;
    let path = dir.join("report.txt");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_types_follow_bad_as_positive() {
        assert_eq!(CaseType::of(1, 1), CaseType::TruePositive);
        assert_eq!(CaseType::of(1, 0), CaseType::FalsePositive);
        assert_eq!(CaseType::of(0, 1), CaseType::FalseNegative);
        assert_eq!(CaseType::of(0, 0), CaseType::TrueNegative);
        assert_eq!(CaseType::FalsePositive.label(), "false positive");
    }

    #[test]
    fn writer_keeps_partials_until_commit() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path(), "abc", 5).unwrap();
        w.json("a.json", &1).unwrap();
        w.text("b.csv", "x\n").unwrap();
        assert!(dir.path().join("a.json.partial").exists());
        assert!(!dir.path().join("a.json").exists());
        w.commit().unwrap();
        let a: Artifact<i32> = read_artifact(dir.path().join("a.json")).unwrap();
        assert_eq!((a.payload, a.seed, a.config_hash.as_str()), (1, 5, "abc"));
        let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert_eq!(b, "# config_hash=abc seed=5\nx\n");
    }
}
