//! Writes a synthetic ledger (clients, accounts, transactions, loans) as CSV.
//!
//! ```text
//! cargo run --example generate_fixture -- fixture/ 200 7
//! ```

use creditshap::synthetic::{generate_ledger, write_source_tables, LedgerConfig};

fn main() -> creditshap::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "fixture".into());
    let mut config = LedgerConfig::default();
    if let Some(n) = args.next().and_then(|s| s.parse().ok()) {
        config.n_accounts = n;
    }
    if let Some(seed) = args.next().and_then(|s| s.parse().ok()) {
        config.seed = seed;
    }
    let tables = generate_ledger(&config)?;
    write_source_tables(&tables, &dir)?;
    println!(
        "{} clients, {} accounts, {} transactions, {} loans -> {dir}",
        tables.clients.len(),
        tables.accounts.len(),
        tables.transactions.len(),
        tables.outcomes.len()
    );
    Ok(())
}
