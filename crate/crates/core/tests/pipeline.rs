use std::path::Path;
use std::process::{Command, Stdio};

use creditshap::cli::{
    explain_account, read_artifact, run_grid, run_pipeline, CaseType, FeatureSet, GridOptions, GridSpec,
    PipelineConfig,
};
use creditshap::error::{Error, ErrorKind};
use creditshap::features::FeatureMatrix;
use creditshap::models::tree::{EnsembleKind, Node, NodeKind, RegressionTree, TreeEnsemble};
use creditshap::models::{Fitted, Model, ModelKind, TrainConfig};
use creditshap::resampling::ResamplingKind;
use creditshap::synthetic::{generate_ledger, planted_signal, write_source_tables, LedgerConfig, PlantedConfig};
use ndarray::array;

fn fixture(dir: &Path, n_accounts: usize) {
    let tables = generate_ledger(&LedgerConfig {
        n_accounts,
        ..Default::default()
    })
    .unwrap();
    write_source_tables(&tables, dir).unwrap();
}

fn config(data: &Path, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.data_dir = Some(data.to_path_buf());
    c.out_dir = out.to_path_buf();
    c.seed = Some(17);
    c.train.oblivious_boosting.n_rounds = 60;
    c
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn small_fixture_produces_every_artifact_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fixture(&data, 50);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(config(&data, &a)).unwrap();
    run_pipeline(config(&data, &b)).unwrap();

    for name in [
        "sanity.json",
        "features.json",
        "features.csv",
        "selection.json",
        "model.json",
        "evaluation.json",
        "importance.json",
        "plots/summary.json",
        "plots/summary.svg",
        "plots/dependence.csv",
        "report.txt",
    ] {
        assert!(a.join(name).exists(), "missing {name}");
    }
    let ta = read_tree(&a);
    let tb = read_tree(&b);
    assert_eq!(ta, tb);
    assert!(ta.iter().all(|(name, _)| !name.ends_with(".partial")));

    let hash = config(&data, &a).hash();
    let model: creditshap::cli::Artifact<serde_json::Value> = read_artifact(a.join("model.json")).unwrap();
    assert_eq!(model.config_hash, hash);
    assert_eq!(model.seed, 17);
    let csv = std::fs::read_to_string(a.join("features.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={hash} seed=17\n")));
}

#[test]
fn unknown_resampler_fails_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut c = config(tmp.path(), &out);
    let err = c.apply_override("resampling.strategy=tomek").unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    c.data_dir = Some(tmp.path().join("does-not-exist"));
    assert_eq!(run_pipeline(c).unwrap_err().kind(), ErrorKind::Config);
    assert!(!out.exists());
}

#[test]
fn all_good_labels_surface_a_stratification_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let tables = generate_ledger(&LedgerConfig {
        n_accounts: 30,
        bad_rate: 0.0,
        ..Default::default()
    })
    .unwrap();
    write_source_tables(&tables, &data).unwrap();
    let out = tmp.path().join("out");
    let err = run_pipeline(config(&data, &out)).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    let Error::Stage { source, .. } = &err else {
        panic!("expected a stage error, got {err}");
    };
    assert!(matches!(**source, Error::SingleClass(_)), "{source}");
    // Earlier stages left flagged partial files, nothing final.
    assert!(out.join("sanity.json.partial").exists());
    assert!(!out.join("sanity.json").exists());
}

fn stump_model() -> Model {
    let tree = RegressionTree {
        nodes: vec![
            Node {
                kind: NodeKind::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    missing_left: true,
                },
                cover: 10.0,
            },
            Node::leaf(-2.0, 6.0),
            Node::leaf(3.0, 4.0),
        ],
        levels: None,
    };
    Model {
        kind: ModelKind::GradientBoosting,
        fitted: Fitted::Trees(TreeEnsemble {
            kind: EnsembleKind::GradientBoosting,
            base_score: 0.0,
            learning_rate: 1.0,
            trees: vec![tree],
            feature_names: vec!["a".into(), "b".into()],
        }),
    }
}

#[test]
fn account_explanations_name_the_confusion_case() {
    let matrix = FeatureMatrix::new(
        vec!["tp".into(), "fp".into(), "tn".into(), "fn".into()],
        vec!["b".into(), "a".into()],
        array![[0.0, 1.0], [0.0, 1.0], [0.0, -1.0], [0.0, -1.0]],
        vec![1, 0, 0, 1],
    )
    .unwrap();
    let model = stump_model();
    let expected = [
        ("tp", CaseType::TruePositive, "true positive"),
        ("fp", CaseType::FalsePositive, "false positive"),
        ("tn", CaseType::TrueNegative, "true negative"),
        ("fn", CaseType::FalseNegative, "false negative"),
    ];
    for (id, case, label) in expected {
        let e = explain_account(&model, &matrix, id, 0.5).unwrap();
        assert_eq!(e.case, case);
        assert_eq!(e.case_label, label);
        let creditshap::explain::plots::PlotBody::Waterfall {
            base_value,
            margin,
            contributions,
            ..
        } = &e.plot.body
        else {
            panic!("waterfall expected");
        };
        let total = base_value + contributions.iter().map(|c| c.shap).sum::<f64>();
        assert!((total - margin).abs() < 1e-12);
    }
    assert!(explain_account(&model, &matrix, "nobody", 0.5).is_err());
}

#[test]
fn two_by_two_grid_has_four_rows() {
    let data = planted_signal(&PlantedConfig {
        n_rows: 300,
        ..Default::default()
    })
    .unwrap();
    let matrix = FeatureMatrix::new(
        (0..data.n_rows()).map(|i| format!("r{i}")).collect(),
        data.feature_names.clone(),
        data.x.clone(),
        data.y.clone(),
    )
    .unwrap();
    let spec = GridSpec::cartesian(
        &[ModelKind::Logistic, ModelKind::ObliviousBoosting],
        &[ResamplingKind::None, ResamplingKind::Smote],
        &[FeatureSet::Full],
    );
    let mut train = TrainConfig::default();
    train.oblivious_boosting.n_rounds = 50;
    let options = GridOptions {
        train,
        k: 5,
        k_neighbors: 5,
        seed: 1,
    };
    let report = run_grid(&spec, &matrix, &options).unwrap();
    assert_eq!(report.rows.len(), 4);
    for r in &report.rows {
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.folds.len(), 5);
        let text = r.cell_text();
        assert!(text.len() == 11 && text.contains(" ("), "{text}");
    }
    assert_eq!(report.to_csv().unwrap().lines().count(), 5);
}

#[test]
fn failing_cell_is_recorded_not_fatal() {
    let data = planted_signal(&PlantedConfig {
        n_rows: 200,
        ..Default::default()
    })
    .unwrap();
    let matrix = FeatureMatrix::new(
        (0..data.n_rows()).map(|i| format!("r{i}")).collect(),
        data.feature_names.clone(),
        data.x.clone(),
        data.y.clone(),
    )
    .unwrap();
    let spec = GridSpec::cartesian(&[ModelKind::Logistic], &[ResamplingKind::None], &[FeatureSet::Full, FeatureSet::TopK(500)]);
    let mut train = TrainConfig::default();
    train.oblivious_boosting.n_rounds = 20;
    let options = GridOptions {
        train,
        k: 3,
        k_neighbors: 5,
        seed: 1,
    };
    let report = run_grid(&spec, &matrix, &options).unwrap();
    assert!(report.rows[0].error.is_none());
    assert!(report.rows[1].error.is_some());
    assert_eq!(report.rows[1].cell_text(), "error");
}

fn binary() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_creditshap"));
    c.env("RUST_LOG", "off").stdout(Stdio::null()).stderr(Stdio::null());
    c
}

#[test]
fn binary_maps_errors_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fixture(&data, 40);
    let out = tmp.path().join("out");
    let run = |args: &[&str]| {
        binary()
            .args(args)
            .args(["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run(&["ingest", "--seed", "3"]), Some(0));
    assert!(out.join("sanity.json").exists());
    assert_eq!(run(&["featurize"]), Some(2), "missing seed");
    assert_eq!(run(&["select", "--seed", "3", "--set", "resampling.strategy=nope"]), Some(2));
    assert_eq!(run(&["explain", "--seed", "3", "--row", "missing", "--set", "oblivious_boosting.n_rounds=5"]), Some(3));
    assert_eq!(run(&["train", "--seed", "3", "--set", "oblivious_boosting.learning_rate=-1"]), Some(2));
    let logistic = ["explain", "--seed", "3", "--row", "any", "--set", "model.kind=logistic"];
    assert_eq!(run(&logistic), Some(4), "tree SHAP on a linear model");
}

#[test]
fn binary_stages_chain_through_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fixture(&data, 60);
    let cfg = tmp.path().join("config.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"data.dir": {:?}, "output.dir": {:?}, "seed": 5, "oblivious_boosting.n_rounds": 30}}"#,
            data.to_str().unwrap(),
            tmp.path().join("out").to_str().unwrap()
        ),
    )
    .unwrap();
    for stage in ["ingest", "featurize", "select", "train", "evaluate", "explain", "report"] {
        let status = binary().args([stage, "--config", cfg.to_str().unwrap()]).status().unwrap();
        assert!(status.success(), "{stage} failed");
    }
    let report = std::fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("106 generated"), "{report}");
    assert!(report.contains("cross-validated gini"), "{report}");

    // --seed on the command line beats the file.
    let status = binary()
        .args(["ingest", "--config", cfg.to_str().unwrap(), "--seed", "6"])
        .status()
        .unwrap();
    assert!(status.success());
    let sanity: creditshap::cli::Artifact<serde_json::Value> = read_artifact(tmp.path().join("out/sanity.json")).unwrap();
    assert_eq!(sanity.seed, 6);
}
