//! Command-line front end: configuration, pipeline stages, the comparison
//! grid, and exit-code mapping.

pub mod config;
pub mod grid;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{ErrorKind, Result};
use crate::models::Model;

pub use config::PipelineConfig;
pub use grid::{cell_seed, run_grid, FeatureSet, GridCell, GridOptions, GridReport, GridRow, GridSpec};
pub use pipeline::{
    explain_account, read_artifact, render_report, run_pipeline, AccountExplanation, Artifact, ArtifactWriter,
    CaseType, Evaluation, Pipeline,
};

#[derive(Debug, Parser)]
#[command(name = "creditshap", version, about = "Explainable credit scoring from account transactions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON config with flat dotted keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Directory holding clients.csv, accounts.csv, transactions.csv, loans.csv.
    #[arg(long, global = true, value_name = "DIR")]
    pub data: Option<PathBuf>,

    /// Override one config key, e.g. `--set model.kind=mlp`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Load and join the source tables; write a sanity report.
    Ingest,
    /// Build the windowed KPI matrix.
    Featurize,
    /// Prune constant, sparse and correlated columns.
    Select,
    /// Fit the configured model on the training split.
    Train,
    /// Cross-validate and score the holdout split.
    Evaluate,
    /// Cross-validate every model × resampling × feature-set cell.
    Grid,
    /// SHAP importance and plot data; `--row` explains one account.
    Explain {
        #[arg(long, value_name = "ROW_ID")]
        row: Option<String>,
    },
    /// Summarize the artifacts already in the output directory.
    Report,
    /// All stages from ingest to explain, then the report.
    Run,
}

/// File config, then flags. Flags win.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(d) = &cli.data {
        config.data_dir = Some(d.clone());
    }
    if let Some(o) = &cli.out {
        config.out_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        config.seed = Some(s);
    }
    Ok(config)
}

/// Runs one subcommand and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = resolve_config(cli)?;
    if let Command::Report = cli.command {
        return pipeline::write_report(&config.out_dir);
    }
    if let Command::Run = cli.command {
        return run_pipeline(config);
    }
    let p = Pipeline::new(config)?;
    p.config.validate_with_data()?;
    let mut w = p.writer()?;
    let (bundle, sanity) = p.ingest()?;
    if let Command::Ingest = cli.command {
        pipeline::write_sanity(&mut w, &sanity)?;
        return w.commit();
    }
    let features = p.featurize(&bundle)?;
    if let Command::Featurize = cli.command {
        pipeline::write_features(&mut w, &features)?;
        return w.commit();
    }
    let (selected, selection) = p.select(&features)?;
    match &cli.command {
        Command::Select => pipeline::write_selection(&mut w, &selection)?,
        Command::Grid => pipeline::write_grid(&mut w, &p.grid(&selected)?)?,
        Command::Train => pipeline::write_model(&mut w, &p.train(&selected)?)?,
        Command::Evaluate => {
            let trained = p.train_or_load(&selected)?;
            pipeline::write_evaluation(&mut w, &p.evaluate(&selected, &trained)?)?;
        }
        Command::Explain { row: None } => {
            let trained = p.train_or_load(&selected)?;
            pipeline::write_explanations(&mut w, &p.explain(&selected, &trained)?)?;
        }
        Command::Explain { row: Some(id) } => {
            let trained = p.train_or_load(&selected)?;
            let e = explain_account(&trained.model, &selected, id, p.config.threshold)
                .map_err(|e| e.in_stage("explain"))?;
            let slug: String = id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                .collect();
            pipeline::write_account(&mut w, &format!("plots/account_{slug}"), &e)?;
        }
        Command::Ingest | Command::Featurize | Command::Report | Command::Run => unreachable!(),
    }
    w.commit()
}

/// 0 ok, 2 configuration, 3 data, 4 compute.
pub fn exit_code(result: &Result<Vec<PathBuf>>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Compute => 4,
        },
    }
}

/// Loads a model artifact written by `train`.
pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<Model> {
    let a: Artifact<crate::models::ModelJson> = read_artifact(path)?;
    Model::from_json(a.payload)
}
