//! Stratified k-fold cross-validation with resampling applied inside each
//! training fold only.
//!
//! ```text
//! cargo run --release --example cross_validate -- [k] [strategy]
//! ```

use creditshap::metrics::{cross_validate, stratified_folds};
use creditshap::models::{ModelKind, TrainConfig};
use creditshap::resampling::{ResamplingKind, ResamplingStrategy};
use creditshap::synthetic::{planted_signal, PlantedConfig};

fn main() -> creditshap::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let kind: ResamplingKind = args.next().as_deref().unwrap_or("smote").parse()?;
    let data = planted_signal(&PlantedConfig::default())?;

    for (f, fold) in stratified_folds(&data.y, k, 9)?.iter().enumerate() {
        let bad = fold.iter().filter(|&&i| data.y[i] == 1).count();
        println!("fold {f}: {} rows, {bad} bad", fold.len());
    }

    let strategy = ResamplingStrategy::new(kind, 9);
    let cv = cross_validate(ModelKind::GradientBoosting, &TrainConfig::default(), &strategy, &data, k, 9)?;
    let folds: Vec<String> = cv.folds.iter().map(|g| format!("{g:.3}")).collect();
    println!("gradient boosting + {kind}: gini per fold [{}]", folds.join(", "));
    println!("mean (sample std): {}", cv.summary());
    println!("pooled ROC has {} points", cv.roc.len());
    Ok(())
}
