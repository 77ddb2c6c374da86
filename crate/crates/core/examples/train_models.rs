//! Fits every model family on a stratified split, scores the holdout and
//! round-trips each model through JSON.
//!
//! ```text
//! cargo run --release --example train_models
//! ```

use std::time::Instant;

use creditshap::metrics::{gini, roc_auc_score, train_test_split};
use creditshap::models::{fit_model, Model, ModelKind, TrainConfig};
use creditshap::synthetic::{planted_signal, PlantedConfig};

fn main() -> creditshap::Result<()> {
    let data = planted_signal(&PlantedConfig::default())?;
    let (train, test) = train_test_split(&data, 0.75, 5, true)?;
    let config = TrainConfig::default();
    println!("{:<20} {:>8} {:>8}  time", "model", "auc", "gini");
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let model = fit_model(kind, &train, &config, 5)?;
        let p = model.predict_proba(&test.data().x)?;
        let auc = roc_auc_score(&test.data().y, &p)?;
        println!("{:<20} {auc:>8.4} {:>8.4}  {:.1?}", kind.label(), gini(auc)?, start.elapsed());

        let restored = Model::from_json(serde_json::from_str(&serde_json::to_string(&model.to_json())?)?)?;
        assert_eq!(restored.predict_proba(&test.data().x)?, p, "{kind} changed after a JSON round trip");
    }
    Ok(())
}
