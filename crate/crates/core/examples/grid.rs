//! A small model x resampling x feature-set comparison on ledger features,
//! printed as a pivot table and CSV.
//!
//! ```text
//! cargo run --release --example grid
//! ```

use creditshap::cli::{run_grid, FeatureSet, GridOptions, GridSpec};
use creditshap::features::build_feature_matrix;
use creditshap::models::{ModelKind, TrainConfig};
use creditshap::resampling::ResamplingKind;
use creditshap::selection::{prune, PruneConfig};
use creditshap::synthetic::{generate_ledger, LedgerConfig};

fn main() -> creditshap::Result<()> {
    let bundle = generate_ledger(&LedgerConfig {
        n_accounts: 400,
        ..Default::default()
    })?
    .join()?;
    let (matrix, _) = prune(&build_feature_matrix(&bundle)?, &PruneConfig::default())?;

    let spec = GridSpec::cartesian(
        &[ModelKind::Logistic, ModelKind::RandomForest, ModelKind::ObliviousBoosting],
        &[ResamplingKind::None, ResamplingKind::Smote, ResamplingKind::ClassWeightProportional],
        &[FeatureSet::Full, FeatureSet::TopK(20)],
    );
    let mut train = TrainConfig::default();
    train.forest.n_trees = 100;
    let options = GridOptions {
        train,
        k: 5,
        k_neighbors: 5,
        seed: 4,
    };
    let report = run_grid(&spec, &matrix, &options)?;
    println!("{}", report.to_text());
    print!("{}", report.to_csv()?);
    Ok(())
}
