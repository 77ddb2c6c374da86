//! Five-fold comparison of logistic regression, gradient boosting and
//! oblivious boosting on the planted-signal dataset.
//!
//! ```text
//! cargo run --release --example benchmark -- [seed]
//! ```

use std::time::Instant;

use creditshap::metrics::cross_validate;
use creditshap::models::{ModelKind, TrainConfig};
use creditshap::resampling::ResamplingStrategy;
use creditshap::synthetic::{planted_signal, PlantedConfig};

fn main() -> creditshap::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let data = planted_signal(&PlantedConfig { seed, ..Default::default() })?;
    let config = TrainConfig::default();
    let strategy = ResamplingStrategy::default();
    for kind in [ModelKind::Logistic, ModelKind::GradientBoosting, ModelKind::ObliviousBoosting] {
        let start = Instant::now();
        let cv = cross_validate(kind, &config, &strategy, &data, 5, seed)?;
        println!("{:<20} {}  [{:.1?}]", kind.label(), cv.summary(), start.elapsed());
    }
    Ok(())
}
