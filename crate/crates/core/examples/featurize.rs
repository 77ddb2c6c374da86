//! Generates a synthetic ledger, joins it, reports sanity statistics and
//! builds the windowed KPI matrix.
//!
//! ```text
//! cargo run --example featurize -- [n_accounts] [features.csv]
//! ```

use std::fs::File;

use creditshap::features::{build_feature_matrix, FeatureConfig};
use creditshap::ingest::validate_bundle;
use creditshap::synthetic::{generate_ledger, LedgerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_accounts = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let bundle = generate_ledger(&LedgerConfig {
        n_accounts,
        ..Default::default()
    })?
    .join()?;

    let sanity = validate_bundle(&bundle);
    println!(
        "{} accounts, {} transactions, {} good / {} bad ({:.1}% bad)",
        sanity.n_accounts,
        sanity.n_transactions,
        sanity.n_good,
        sanity.n_bad,
        100.0 * sanity.bad_fraction
    );
    for w in &sanity.warnings {
        println!("warning: {w}");
    }

    let matrix = build_feature_matrix(&bundle)?;
    println!("{} rows x {} columns", matrix.n_rows(), matrix.n_cols());
    for w in FeatureConfig::default().windows {
        let n = matrix.columns.iter().filter(|c| c.ends_with(&format!("_{}", w.label))).count();
        println!("  window {:<8} days [{}, {}): {n} columns", w.label, w.lo, w.hi);
    }
    let missing = matrix.values.iter().filter(|v| v.is_nan()).count();
    println!("{missing} missing cells");

    if let Some(path) = args.next() {
        matrix.write_csv(File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
