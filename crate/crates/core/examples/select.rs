//! Prunes constant, sparse and correlated KPI columns, then keeps the top
//! columns by mean absolute SHAP value.
//!
//! ```text
//! cargo run --release --example select -- [top_k]
//! ```

use creditshap::dataset::{Dataset, TrainSet};
use creditshap::explain::global_importance;
use creditshap::features::build_feature_matrix;
use creditshap::models::{fit_model, ModelKind, TrainConfig};
use creditshap::selection::{prune, select_top_k_by_shap, PruneConfig, RemovalReason};
use creditshap::synthetic::{generate_ledger, LedgerConfig};

fn main() -> creditshap::Result<()> {
    let top_k = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let bundle = generate_ledger(&LedgerConfig::default())?.join()?;
    let matrix = build_feature_matrix(&bundle)?;

    let (pruned, report) = prune(&matrix, &PruneConfig::default())?;
    println!("{} of {} columns survive pruning", report.surviving.len(), report.original.len());
    for r in report.removed.iter().take(12) {
        let why = match &r.reason {
            RemovalReason::Constant => "constant".to_string(),
            RemovalReason::Missing { fraction } => format!("{:.0}% missing", 100.0 * fraction),
            RemovalReason::Correlated { with, r } => format!("r = {r:.3} with {with}"),
            RemovalReason::NotInTopK { .. } => unreachable!(),
        };
        println!("  - {:<40} {why}", r.column);
    }
    if report.removed.len() > 12 {
        println!("  ... {} more", report.removed.len() - 12);
    }

    let train = TrainSet::without_holdout(Dataset::from_matrix(&pruned));
    let model = fit_model(ModelKind::ObliviousBoosting, &train, &TrainConfig::default(), 1)?;
    let ensemble = model.tree_ensemble().expect("oblivious boosting is a tree ensemble");
    let importance = global_importance(ensemble, &pruned.values)?;
    let top = select_top_k_by_shap(&pruned.columns, &importance.importance, top_k.min(pruned.n_cols()))?;
    println!("top {} by mean |SHAP|:", top.surviving.len());
    for &c in importance.ranking.iter().take(top.surviving.len()) {
        println!("  {:<40} {:.4}", importance.feature_names[c], importance.importance[c]);
    }
    Ok(())
}
