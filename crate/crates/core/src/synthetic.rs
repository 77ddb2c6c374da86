//! Seeded data generators: a small bank ledger with loan outcomes, and a dense
//! design matrix with a planted non-linear default signal.

use std::path::Path;

use chrono::{Duration, NaiveDate};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ingest::{AccountRecord, Cents, ClientRecord, LoanOutcome, SourceTables, TableKind, TransactionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub n_accounts: usize,
    pub bad_rate: f64,
    pub seed: u64,
    /// First day with transactions.
    pub start: NaiveDate,
    /// Days between `start` and the earliest application.
    pub history_days: i64,
    /// Spread of application dates after the earliest one.
    pub application_spread_days: i64,
    /// Share of clients that hold a second account.
    pub joint_client_share: f64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            n_accounts: 200,
            bad_rate: 0.111,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            history_days: 130,
            application_spread_days: 60,
            joint_client_share: 0.05,
        }
    }
}

/// Generates clients, accounts, transactions and loan outcomes.
///
/// Snapshot balances stay within roughly `[-300, 731]` and single
/// transactions within `±364`. Bad accounts draw more and larger outgoing
/// payments on average, so windowed KPIs carry a noisy signal.
pub fn generate_ledger(config: &LedgerConfig) -> Result<SourceTables> {
    if config.n_accounts == 0 {
        return Err(Error::InvalidArgument("need at least one account".into()));
    }
    if !(0.0..=1.0).contains(&config.bad_rate) {
        return Err(Error::InvalidArgument("bad rate must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_bad = (config.n_accounts as f64 * config.bad_rate).round() as usize;
    let mut labels: Vec<u8> = (0..config.n_accounts).map(|i| (i < n_bad) as u8).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }

    let mut clients: Vec<ClientRecord> = Vec::new();
    let mut accounts = Vec::new();
    let mut transactions = Vec::new();
    let mut outcomes = Vec::new();
    let mut next_txn = 0usize;
    for (i, &bad) in labels.iter().enumerate() {
        let account_id = format!("A{i:05}");
        match clients.last_mut() {
            Some(c) if c.account_links.len() == 1 && rng.gen_bool(config.joint_client_share) => {
                c.account_links.push(account_id.clone());
            }
            _ => clients.push(ClientRecord {
                client_id: format!("C{:05}", clients.len()),
                account_links: vec![account_id.clone()],
            }),
        }
        let application = config.start
            + Duration::days(config.history_days + rng.gen_range(0..=config.application_spread_days.max(0)));
        let snapshot_date = application + Duration::days(rng.gen_range(0..=30));

        // Spending intensity follows a latent risk that is higher, on
        // average, for bad accounts; the two classes overlap.
        let noise: f64 = StandardNormal.sample(&mut rng);
        let risk = noise + if bad == 1 { 1.5 } else { 0.0 };
        let active = rng.gen_bool(if bad == 1 { 0.97 } else { 0.93 });
        let p_in = rng.gen_range(0.10..0.16);
        let p_out = (0.20 + 0.06 * risk).clamp(0.05, 0.5);
        let out_scale = (100.0 + 30.0 * risk).clamp(40.0, 220.0);
        let mut day = config.start;
        while active && day <= snapshot_date {
            if rng.gen_bool(p_in) {
                let amount = rng.gen_range(20.0..364.0f64);
                transactions.push(txn(&mut next_txn, &account_id, day, amount));
            }
            if rng.gen_bool(p_out) {
                let amount = -(rng.gen_range(0.2..1.0f64) * out_scale * rng.gen_range(0.5..2.6f64)).min(364.0);
                transactions.push(txn(&mut next_txn, &account_id, day, amount));
            }
            day += Duration::days(1);
        }
        let balance = if bad == 1 {
            rng.gen_range(-300.0..450.0f64)
        } else {
            rng.gen_range(-200.0..731.0f64)
        };
        accounts.push(AccountRecord {
            account_id: account_id.clone(),
            snapshot_balance: Cents((balance * 100.0).round() as i64),
            snapshot_date,
        });
        outcomes.push(LoanOutcome {
            account_id,
            application_date: application,
            performance: bad,
        });
    }
    Ok(SourceTables {
        clients,
        accounts,
        transactions,
        outcomes,
    })
}

fn txn(counter: &mut usize, account: &str, date: NaiveDate, amount: f64) -> TransactionRecord {
    *counter += 1;
    TransactionRecord {
        transaction_id: format!("T{:07}", *counter),
        account_id: account.to_string(),
        date,
        amount: Cents((amount * 100.0).round() as i64),
    }
}

/// Writes the four source CSV files into `dir`.
pub fn write_source_tables(tables: &SourceTables, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |kind: TableKind, rows: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(kind.file_name());
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
        let io = |e: csv::Error| Error::io(&path, e.into());
        w.write_record(kind.header()).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write(
        TableKind::Clients,
        tables
            .clients
            .iter()
            .flat_map(|c| c.account_links.iter().map(|a| vec![c.client_id.clone(), a.clone()]))
            .collect(),
    )?;
    write(
        TableKind::Accounts,
        tables
            .accounts
            .iter()
            .map(|a| {
                vec![
                    a.account_id.clone(),
                    a.snapshot_balance.to_string(),
                    a.snapshot_date.to_string(),
                ]
            })
            .collect(),
    )?;
    write(
        TableKind::Transactions,
        tables
            .transactions
            .iter()
            .map(|t| {
                vec![
                    t.transaction_id.clone(),
                    t.account_id.clone(),
                    t.date.to_string(),
                    t.amount.to_string(),
                ]
            })
            .collect(),
    )?;
    write(
        TableKind::Loans,
        tables
            .outcomes
            .iter()
            .map(|o| {
                vec![
                    o.account_id.clone(),
                    o.application_date.to_string(),
                    o.performance.to_string(),
                ]
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_rows: usize,
    pub n_features: usize,
    pub bad_rate: f64,
    /// Standard deviation of the logistic-like noise added to the signal.
    pub noise: f64,
    /// Share of missing cells in the pure-noise columns.
    pub missing_share: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_rows: 2000,
            n_features: 20,
            bad_rate: 0.111,
            noise: 0.6,
            missing_share: 0.03,
            seed: 11,
        }
    }
}

/// Latent default score of the planted generator: monotone effects in
/// `x0..x3` plus interactions among `x4..x7`. Columns from `x8` on are noise.
pub fn planted_score(row: &[f64]) -> f64 {
    let step = |v: f64| (v > 0.0) as u8 as f64;
    1.0 * row[0] + 0.8 * (2.0 * row[1]).tanh() + 0.7 * step(row[2] - 0.5) - 0.5 * row[3].min(0.5)
        + 1.4 * row[4] * row[5]
        + 1.6 * step(row[6] - 0.3) * step(row[7] + 0.2)
}

/// `n_rows × n_features` standard-normal design whose labels mark the rows
/// with the highest `planted_score + noise` as bad, so the bad share is exact.
pub fn planted_signal(config: &PlantedConfig) -> Result<Dataset> {
    if config.n_features < 8 {
        return Err(Error::InvalidArgument("the planted signal needs at least 8 features".into()));
    }
    if !(config.bad_rate > 0.0 && config.bad_rate < 1.0) {
        return Err(Error::InvalidArgument("bad rate must be in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, config.noise.max(1e-12)).expect("finite noise");
    let (n, p) = (config.n_rows, config.n_features);
    let mut x = Array2::from_shape_fn((n, p), |_| normal.sample(&mut rng));
    let latent: Vec<f64> = (0..n)
        .map(|i| planted_score(x.row(i).as_slice().expect("standard layout")) + noise.sample(&mut rng))
        .collect();
    let n_bad = (n as f64 * config.bad_rate).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
    let mut y = vec![0u8; n];
    for &i in &order[..n_bad] {
        y[i] = 1;
    }
    for v in x.slice_mut(ndarray::s![.., 8..]).iter_mut() {
        if rng.gen_bool(config.missing_share) {
            *v = f64::NAN;
        }
    }
    Dataset::new(x, y, (0..p).map(|j| format!("x{j}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::validate_bundle;

    #[test]
    fn ledger_round_trips_through_csv() {
        let cfg = LedgerConfig {
            n_accounts: 40,
            ..Default::default()
        };
        let tables = generate_ledger(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_source_tables(&tables, dir.path()).unwrap();
        let loaded = SourceTables::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.accounts, tables.accounts);
        assert_eq!(loaded.transactions, tables.transactions);
        assert_eq!(loaded.outcomes, tables.outcomes);
        let bundle = loaded.join().unwrap();
        let report = validate_bundle(&bundle);
        assert_eq!(report.n_bad, 4);
        assert!(report.max_transaction.unwrap() <= 364.0 && report.min_transaction.unwrap() >= -364.0);
    }

    #[test]
    fn ledger_is_seeded() {
        let a = generate_ledger(&LedgerConfig::default()).unwrap();
        let b = generate_ledger(&LedgerConfig::default()).unwrap();
        assert_eq!(a.transactions, b.transactions);
    }

    #[test]
    fn planted_rate_is_exact() {
        let d = planted_signal(&PlantedConfig::default()).unwrap();
        assert_eq!(d.class_counts(), (1778, 222));
        assert!(d.has_missing());
    }
}
