//! Source tables, joining, and daily balance reconstruction.
//!
//! Currency is carried as integer cents ([`Cents`]) so that walking a balance
//! snapshot backwards over hundreds of transactions stays exact.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days of history reconstructed before the earliest application date.
pub const DEFAULT_HORIZON_DAYS: i64 = 120;

/// Signed currency amount in cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl std::ops::AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl std::ops::SubAssign for Cents {
    fn sub_assign(&mut self, rhs: Cents) {
        self.0 -= rhs.0;
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

/// Parses a decimal amount with at most two fraction digits.
impl FromStr for Cents {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if body.is_empty() {
            return Err(format!("`{s}` is not a decimal amount"));
        }
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if frac_part.len() > 2 {
            return Err(format!("`{s}` has more than two fraction digits"));
        }
        let digits_ok = |p: &str| p.chars().all(|c| c.is_ascii_digit());
        if !digits_ok(int_part) || !digits_ok(frac_part) || (int_part.is_empty() && frac_part.is_empty()) {
            return Err(format!("`{s}` is not a decimal amount"));
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| format!("`{s}` is out of range"))?
        };
        let frac: i64 = match frac_part.len() {
            0 => 0,
            1 => frac_part.parse::<i64>().unwrap() * 10,
            _ => frac_part.parse::<i64>().unwrap(),
        };
        let value = whole
            .checked_mul(100)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(|| format!("`{s}` is out of range"))?;
        Ok(Cents(if negative { -value } else { value }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub client_id: String,
    pub account_links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub account_id: String,
    pub snapshot_balance: Cents,
    pub snapshot_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub transaction_id: String,
    pub account_id: String,
    pub date: NaiveDate,
    /// Positive is incoming, negative is outgoing.
    pub amount: Cents,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoanOutcome {
    pub account_id: String,
    pub application_date: NaiveDate,
    /// 1 = bad (insolvent), 0 = good.
    pub performance: u8,
}

/// The four source tables and their CSV headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Clients,
    Accounts,
    Transactions,
    Loans,
}

impl TableKind {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            TableKind::Clients => &["client_id", "account_id"],
            TableKind::Accounts => &["account_id", "balance", "balance_date"],
            TableKind::Transactions => &["transaction_id", "account_id", "date", "amount"],
            TableKind::Loans => &["account_id", "application_date", "performance"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableKind::Clients => "clients",
            TableKind::Accounts => "accounts",
            TableKind::Transactions => "transactions",
            TableKind::Loans => "loans",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            TableKind::Clients => "clients.csv",
            TableKind::Accounts => "accounts.csv",
            TableKind::Transactions => "transactions.csv",
            TableKind::Loans => "loans.csv",
        }
    }
}

/// A row type that can be read from one of the source CSV files.
pub trait TableRecord: Sized {
    const KIND: TableKind;

    fn parse(fields: &RowFields<'_>) -> Result<Self>;

    /// Primary key used for duplicate detection.
    fn key(&self) -> String;
}

/// Field accessor carrying enough context for row/column error messages.
pub struct RowFields<'a> {
    path: &'a Path,
    row: usize,
    record: &'a csv::StringRecord,
    header: &'static [&'static str],
}

impl RowFields<'_> {
    fn error(&self, column: usize, message: impl Into<String>) -> Error {
        Error::MalformedRow {
            path: self.path.to_path_buf(),
            row: self.row,
            column: self.header[column].to_string(),
            message: message.into(),
        }
    }

    pub fn text(&self, column: usize) -> Result<&str> {
        let value = self.record.get(column).map(str::trim).unwrap_or("");
        if value.is_empty() {
            return Err(self.error(column, "empty value"));
        }
        Ok(value)
    }

    pub fn date(&self, column: usize) -> Result<NaiveDate> {
        let text = self.text(column)?;
        NaiveDate::parse_from_str(text, "%Y-%m-%d")
            .map_err(|e| self.error(column, format!("`{text}` is not an ISO-8601 date ({e})")))
    }

    pub fn cents(&self, column: usize) -> Result<Cents> {
        self.text(column)?
            .parse::<Cents>()
            .map_err(|m| self.error(column, m))
    }
}

impl TableRecord for (String, String) {
    const KIND: TableKind = TableKind::Clients;

    fn parse(fields: &RowFields<'_>) -> Result<Self> {
        Ok((fields.text(0)?.to_string(), fields.text(1)?.to_string()))
    }

    fn key(&self) -> String {
        format!("{}/{}", self.0, self.1)
    }
}

impl TableRecord for AccountRecord {
    const KIND: TableKind = TableKind::Accounts;

    fn parse(fields: &RowFields<'_>) -> Result<Self> {
        Ok(AccountRecord {
            account_id: fields.text(0)?.to_string(),
            snapshot_balance: fields.cents(1)?,
            snapshot_date: fields.date(2)?,
        })
    }

    fn key(&self) -> String {
        self.account_id.clone()
    }
}

impl TableRecord for TransactionRecord {
    const KIND: TableKind = TableKind::Transactions;

    fn parse(fields: &RowFields<'_>) -> Result<Self> {
        let amount = fields.cents(3)?;
        if amount.0 == 0 {
            return Err(fields.error(3, "transaction amount must be nonzero"));
        }
        Ok(TransactionRecord {
            transaction_id: fields.text(0)?.to_string(),
            account_id: fields.text(1)?.to_string(),
            date: fields.date(2)?,
            amount,
        })
    }

    fn key(&self) -> String {
        self.transaction_id.clone()
    }
}

impl TableRecord for LoanOutcome {
    const KIND: TableKind = TableKind::Loans;

    fn parse(fields: &RowFields<'_>) -> Result<Self> {
        let performance = match fields.text(2)? {
            "0" => 0,
            "1" => 1,
            other => return Err(fields.error(2, format!("performance must be 0 or 1, got `{other}`"))),
        };
        Ok(LoanOutcome {
            account_id: fields.text(0)?.to_string(),
            application_date: fields.date(1)?,
            performance,
        })
    }

    fn key(&self) -> String {
        format!("{}@{}", self.account_id, self.application_date)
    }
}

/// Reads one source table. Row order is preserved; row numbers in errors
/// count data rows from 1.
pub fn load_table<R: TableRecord>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(path, file)
}

fn read_table<R: TableRecord>(path: &Path, reader: impl std::io::Read) -> Result<Vec<R>> {
    let header = R::KIND.header();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?
        .clone();
    let found_names: Vec<&str> = found.iter().map(str::trim).collect();
    if found_names != header {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found_names.join(","),
        });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                column: header.get(record.len()).unwrap_or(&"").to_string(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let fields = RowFields {
            path,
            row,
            record: &record,
            header,
        };
        let parsed = R::parse(&fields)?;
        let key = parsed.key();
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateKey {
                table: R::KIND.name(),
                key,
            });
        }
        out.push(parsed);
    }
    Ok(out)
}

/// Groups `(client_id, account_id)` link rows into client records, in order of
/// first appearance.
pub fn group_clients(links: Vec<(String, String)>) -> Vec<ClientRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut by_client: HashMap<String, Vec<String>> = HashMap::new();
    for (client, account) in links {
        by_client
            .entry(client.clone())
            .or_insert_with(|| {
                order.push(client.clone());
                Vec::new()
            })
            .push(account);
    }
    order
        .into_iter()
        .map(|client_id| {
            let account_links = by_client.remove(&client_id).unwrap_or_default();
            ClientRecord {
                client_id,
                account_links,
            }
        })
        .collect()
}

/// Raw tables as read from a data directory.
#[derive(Debug, Clone)]
pub struct SourceTables {
    pub clients: Vec<ClientRecord>,
    pub accounts: Vec<AccountRecord>,
    pub transactions: Vec<TransactionRecord>,
    pub outcomes: Vec<LoanOutcome>,
}

impl SourceTables {
    /// Loads `clients.csv`, `accounts.csv`, `transactions.csv` and `loans.csv`
    /// from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(SourceTables {
            clients: group_clients(load_table(dir.join(TableKind::Clients.file_name()))?),
            accounts: load_table(dir.join(TableKind::Accounts.file_name()))?,
            transactions: load_table(dir.join(TableKind::Transactions.file_name()))?,
            outcomes: load_table(dir.join(TableKind::Loans.file_name()))?,
        })
    }

    pub fn join(self) -> Result<LedgerBundle> {
        join_bundle(self.clients, self.accounts, self.transactions, self.outcomes)
    }
}

/// One calendar day per balance value, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyBalanceSeries {
    pub account_id: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub balances: Vec<Cents>,
}

impl DailyBalanceSeries {
    pub fn balance_on(&self, date: NaiveDate) -> Option<Cents> {
        if date < self.start_date || date > self.end_date {
            return None;
        }
        let idx = (date - self.start_date).num_days() as usize;
        self.balances.get(idx).copied()
    }

    pub fn len(&self) -> usize {
        self.balances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }

    /// Iterates `(date, balance)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, Cents)> + '_ {
        self.balances
            .iter()
            .enumerate()
            .map(move |(i, &b)| (self.start_date + Duration::days(i as i64), b))
    }
}

/// Walks the snapshot balance backwards:
/// `balance(d) = snapshot - sum(amount(t) for d < t.date <= snapshot_date)`.
pub fn reconstruct_balances(
    account: &AccountRecord,
    txns: &[&TransactionRecord],
    start_date: NaiveDate,
) -> Result<DailyBalanceSeries> {
    let end = account.snapshot_date;
    if start_date > end {
        return Err(Error::InvalidArgument(format!(
            "start date {start_date} is after snapshot date {end} for account `{}`",
            account.account_id
        )));
    }
    let days = (end - start_date).num_days() as usize + 1;
    // net[i] = sum of amounts dated start_date + i
    let mut net = vec![Cents(0); days];
    for t in txns {
        if t.account_id != account.account_id {
            return Err(Error::InvalidArgument(format!(
                "transaction `{}` belongs to account `{}`, not `{}`",
                t.transaction_id, t.account_id, account.account_id
            )));
        }
        if t.date > end {
            return Err(Error::InvalidData(format!(
                "transaction `{}` dated {} is after the snapshot date {end} of account `{}`",
                t.transaction_id, t.date, account.account_id
            )));
        }
        if t.date >= start_date {
            net[(t.date - start_date).num_days() as usize] += t.amount;
        }
    }
    let mut balances = vec![Cents(0); days];
    let mut running = account.snapshot_balance;
    balances[days - 1] = running;
    for i in (0..days - 1).rev() {
        running -= net[i + 1];
        balances[i] = running;
    }
    Ok(DailyBalanceSeries {
        account_id: account.account_id.clone(),
        start_date,
        end_date: end,
        balances,
    })
}

/// Joined tables with an account index and reconstructed balances.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerBundle {
    pub clients: Vec<ClientRecord>,
    pub accounts: Vec<AccountRecord>,
    pub transactions: Vec<TransactionRecord>,
    pub outcomes: Vec<LoanOutcome>,
    /// account_id -> position in `accounts`.
    pub account_index: BTreeMap<String, usize>,
    /// account_id -> positions in `transactions`, sorted by date.
    pub transactions_by_account: BTreeMap<String, Vec<usize>>,
    pub balances: BTreeMap<String, DailyBalanceSeries>,
}

impl LedgerBundle {
    pub fn account(&self, account_id: &str) -> Option<&AccountRecord> {
        self.account_index.get(account_id).map(|&i| &self.accounts[i])
    }

    pub fn account_transactions(&self, account_id: &str) -> Vec<&TransactionRecord> {
        self.transactions_by_account
            .get(account_id)
            .map(|idx| idx.iter().map(|&i| &self.transactions[i]).collect())
            .unwrap_or_default()
    }

    pub fn is_labeled(&self, account_id: &str) -> bool {
        self.outcomes.iter().any(|o| o.account_id == account_id)
    }

    /// Accounts without any loan outcome; kept as possible background rows.
    pub fn unlabeled_accounts(&self) -> Vec<&str> {
        let labeled: HashSet<&str> = self.outcomes.iter().map(|o| o.account_id.as_str()).collect();
        self.accounts
            .iter()
            .map(|a| a.account_id.as_str())
            .filter(|id| !labeled.contains(id))
            .collect()
    }
}

/// Joins the four tables, enforcing referential integrity, and reconstructs
/// each account's daily balance back to `horizon` days before its earliest
/// application (or its earliest transaction, whichever is older).
pub fn join_bundle(
    clients: Vec<ClientRecord>,
    accounts: Vec<AccountRecord>,
    transactions: Vec<TransactionRecord>,
    outcomes: Vec<LoanOutcome>,
) -> Result<LedgerBundle> {
    join_bundle_with_horizon(clients, accounts, transactions, outcomes, DEFAULT_HORIZON_DAYS)
}

pub fn join_bundle_with_horizon(
    clients: Vec<ClientRecord>,
    accounts: Vec<AccountRecord>,
    transactions: Vec<TransactionRecord>,
    outcomes: Vec<LoanOutcome>,
    horizon_days: i64,
) -> Result<LedgerBundle> {
    let mut account_index = BTreeMap::new();
    for (i, a) in accounts.iter().enumerate() {
        if account_index.insert(a.account_id.clone(), i).is_some() {
            return Err(Error::DuplicateKey {
                table: "accounts",
                key: a.account_id.clone(),
            });
        }
    }

    let mut seen_clients = HashSet::new();
    for c in &clients {
        if !seen_clients.insert(c.client_id.as_str()) {
            return Err(Error::DuplicateKey {
                table: "clients",
                key: c.client_id.clone(),
            });
        }
        if c.account_links.is_empty() {
            return Err(Error::InvalidData(format!(
                "client `{}` has no linked account",
                c.client_id
            )));
        }
        for link in &c.account_links {
            if !account_index.contains_key(link) {
                return Err(Error::UnknownAccount {
                    table: "clients",
                    account_id: link.clone(),
                });
            }
        }
    }

    let mut transactions_by_account: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut seen_txns = HashSet::new();
    for (i, t) in transactions.iter().enumerate() {
        if !seen_txns.insert(t.transaction_id.as_str()) {
            return Err(Error::DuplicateKey {
                table: "transactions",
                key: t.transaction_id.clone(),
            });
        }
        let Some(&ai) = account_index.get(&t.account_id) else {
            return Err(Error::UnknownAccount {
                table: "transactions",
                account_id: t.account_id.clone(),
            });
        };
        if t.date > accounts[ai].snapshot_date {
            return Err(Error::InvalidData(format!(
                "transaction `{}` dated {} is after the snapshot date {} of account `{}`",
                t.transaction_id, t.date, accounts[ai].snapshot_date, t.account_id
            )));
        }
        transactions_by_account
            .entry(t.account_id.clone())
            .or_default()
            .push(i);
    }
    for idx in transactions_by_account.values_mut() {
        idx.sort_by_key(|&i| (transactions[i].date, i));
    }

    let mut seen_outcomes = HashSet::new();
    let mut first_application: HashMap<&str, NaiveDate> = HashMap::new();
    for o in &outcomes {
        if !seen_outcomes.insert((o.account_id.as_str(), o.application_date)) {
            return Err(Error::DuplicateKey {
                table: "loans",
                key: format!("{}@{}", o.account_id, o.application_date),
            });
        }
        let Some(&ai) = account_index.get(&o.account_id) else {
            return Err(Error::UnknownAccount {
                table: "loans",
                account_id: o.account_id.clone(),
            });
        };
        if accounts[ai].snapshot_date < o.application_date {
            return Err(Error::InvalidData(format!(
                "account `{}` has snapshot date {} before its application date {}; \
                 the snapshot must cover the observation window",
                o.account_id, accounts[ai].snapshot_date, o.application_date
            )));
        }
        first_application
            .entry(o.account_id.as_str())
            .and_modify(|d| *d = (*d).min(o.application_date))
            .or_insert(o.application_date);
    }

    let mut balances = BTreeMap::new();
    for a in &accounts {
        let txns: Vec<&TransactionRecord> = transactions_by_account
            .get(&a.account_id)
            .map(|idx| idx.iter().map(|&i| &transactions[i]).collect())
            .unwrap_or_default();
        let mut start = first_application
            .get(a.account_id.as_str())
            .map(|d| *d - Duration::days(horizon_days))
            .unwrap_or(a.snapshot_date);
        if let Some(first) = txns.first() {
            start = start.min(first.date);
        }
        balances.insert(a.account_id.clone(), reconstruct_balances(a, &txns, start)?);
    }

    Ok(LedgerBundle {
        clients,
        accounts,
        transactions,
        outcomes,
        account_index,
        transactions_by_account,
        balances,
    })
}

/// Descriptive statistics of a joined bundle. Never mutates the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub n_clients: usize,
    pub n_accounts: usize,
    pub n_transactions: usize,
    pub n_outcomes: usize,
    pub n_unlabeled_accounts: usize,
    pub shared_accounts: usize,
    pub min_balance: Option<f64>,
    pub max_balance: Option<f64>,
    pub min_daily_balance: Option<f64>,
    pub max_daily_balance: Option<f64>,
    pub min_transaction: Option<f64>,
    pub max_transaction: Option<f64>,
    pub n_good: usize,
    pub n_bad: usize,
    pub good_fraction: f64,
    pub bad_fraction: f64,
    pub warnings: Vec<String>,
}

pub fn validate_bundle(bundle: &LedgerBundle) -> SanityReport {
    let snap = bundle.accounts.iter().map(|a| a.snapshot_balance);
    let min_balance = snap.clone().min().map(Cents::as_f64);
    let max_balance = snap.max().map(Cents::as_f64);
    let daily = bundle.balances.values().flat_map(|s| s.balances.iter().copied());
    let min_daily_balance = daily.clone().min().map(Cents::as_f64);
    let max_daily_balance = daily.max().map(Cents::as_f64);
    let amounts = bundle.transactions.iter().map(|t| t.amount);
    let min_transaction = amounts.clone().min().map(Cents::as_f64);
    let max_transaction = amounts.max().map(Cents::as_f64);

    let n_bad = bundle.outcomes.iter().filter(|o| o.performance == 1).count();
    let n_good = bundle.outcomes.len() - n_bad;
    let total = bundle.outcomes.len().max(1) as f64;

    let mut link_counts: HashMap<&str, usize> = HashMap::new();
    for c in &bundle.clients {
        for a in &c.account_links {
            *link_counts.entry(a.as_str()).or_default() += 1;
        }
    }
    let shared_accounts = link_counts.values().filter(|&&n| n > 1).count();
    let n_unlabeled_accounts = bundle.unlabeled_accounts().len();

    let mut warnings = Vec::new();
    if bundle.outcomes.is_empty() {
        warnings.push("no labeled accounts".to_string());
    } else if n_bad == 0 || n_good == 0 {
        warnings.push("only one performance class present".to_string());
    }
    if n_unlabeled_accounts > 0 {
        warnings.push(format!("{n_unlabeled_accounts} accounts have no loan outcome"));
    }
    let without_txns = bundle
        .accounts
        .iter()
        .filter(|a| !bundle.transactions_by_account.contains_key(&a.account_id))
        .count();
    if without_txns > 0 {
        warnings.push(format!("{without_txns} accounts have no transactions"));
    }

    SanityReport {
        n_clients: bundle.clients.len(),
        n_accounts: bundle.accounts.len(),
        n_transactions: bundle.transactions.len(),
        n_outcomes: bundle.outcomes.len(),
        n_unlabeled_accounts,
        shared_accounts,
        min_balance,
        max_balance,
        min_daily_balance,
        max_daily_balance,
        min_transaction,
        max_transaction,
        n_good,
        n_bad,
        good_fraction: n_good as f64 / total,
        bad_fraction: n_bad as f64 / total,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn day(n: i64) -> NaiveDate {
        d("2020-01-01") + Duration::days(n)
    }

    fn txn(id: &str, account: &str, date: NaiveDate, amount: i64) -> TransactionRecord {
        TransactionRecord {
            transaction_id: id.into(),
            account_id: account.into(),
            date,
            amount: Cents(amount),
        }
    }

    fn account(id: &str, balance: i64, date: NaiveDate) -> AccountRecord {
        AccountRecord {
            account_id: id.into(),
            snapshot_balance: Cents(balance),
            snapshot_date: date,
        }
    }

    #[test]
    fn cents_parse() {
        assert_eq!("12.5".parse::<Cents>().unwrap(), Cents(1250));
        assert_eq!("-0.07".parse::<Cents>().unwrap(), Cents(-7));
        assert_eq!("+364".parse::<Cents>().unwrap(), Cents(36400));
        assert_eq!(Cents(-36400).to_string(), "-364.00");
        assert!("1.234".parse::<Cents>().is_err());
        assert!("abc".parse::<Cents>().is_err());
        assert!("-".parse::<Cents>().is_err());
    }

    #[test]
    fn reads_transactions() {
        let csv = "transaction_id,account_id,date,amount\n\
                   t1,a1,2020-01-02,10.50\n\
                   t2,a1,2020-01-03,-3\n\
                   t3,a2,2020-01-04,7.25\n";
        let rows: Vec<TransactionRecord> = read_table(Path::new("t.csv"), csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].amount, Cents(1050));
        assert_eq!(rows[1].amount, Cents(-300));
        assert_eq!(rows[2].transaction_id, "t3");
    }

    #[test]
    fn duplicate_transaction_id_is_rejected() {
        let csv = "transaction_id,account_id,date,amount\n\
                   t1,a1,2020-01-02,1\n\
                   t1,a1,2020-01-03,2\n";
        let err = read_table::<TransactionRecord>(Path::new("t.csv"), csv.as_bytes()).unwrap_err();
        match err {
            Error::DuplicateKey { key, .. } => assert_eq!(key, "t1"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_only_is_empty_table() {
        let csv = "account_id,balance,balance_date\n";
        let rows: Vec<AccountRecord> = read_table(Path::new("a.csv"), csv.as_bytes()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn malformed_row_reports_row_and_column() {
        let csv = "account_id,balance,balance_date\n\
                   a1,1.00,2020-01-01\n\
                   a2,1.00,2020-13-01\n";
        let err = read_table::<AccountRecord>(Path::new("a.csv"), csv.as_bytes()).unwrap_err();
        match err {
            Error::MalformedRow { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "balance_date");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let csv = "id,balance,balance_date\n";
        let err = read_table::<AccountRecord>(Path::new("a.csv"), csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
    }

    #[test]
    fn missing_file() {
        let err = load_table::<AccountRecord>("/nonexistent/accounts.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn balance_back_propagation_single_txn() {
        let acc = account("a", 10_000, day(10));
        let t = txn("t", "a", day(5), 3_000);
        let s = reconstruct_balances(&acc, &[&t], day(0)).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.balance_on(day(4)), Some(Cents(7_000)));
        assert_eq!(s.balance_on(day(5)), Some(Cents(10_000)));
        assert_eq!(s.balance_on(day(10)), Some(Cents(10_000)));
        assert_eq!(s.balance_on(day(11)), None);
    }

    #[test]
    fn no_transactions_gives_constant_series() {
        let acc = account("a", 4_200, day(30));
        let s = reconstruct_balances(&acc, &[], day(0)).unwrap();
        assert!(s.balances.iter().all(|&b| b == Cents(4_200)));
        assert_eq!(s.len(), 31);
    }

    #[test]
    fn back_propagation_matches_forward_cumulative_sum() {
        let acc = account("a", 0, day(10));
        let t1 = txn("t1", "a", day(3), 36_400);
        let t2 = txn("t2", "a", day(7), -36_400);
        let s = reconstruct_balances(&acc, &[&t1, &t2], day(0)).unwrap();
        // Forward oracle: opening balance = snapshot - all txns, then cumulative sum.
        let opening = 0;
        let mut expected = Vec::new();
        let mut running = opening;
        for n in 0..=10 {
            if n == 3 {
                running += 36_400;
            }
            if n == 7 {
                running -= 36_400;
            }
            expected.push(Cents(running));
        }
        assert_eq!(s.balances, expected);
        assert_eq!(s.balance_on(day(2)), Some(Cents(0)));
        assert_eq!(s.balance_on(day(3)), Some(Cents(36_400)));
        assert_eq!(s.balance_on(day(6)), Some(Cents(36_400)));
        assert_eq!(s.balance_on(day(7)), Some(Cents(0)));
    }

    #[test]
    fn txn_after_snapshot_is_an_error() {
        let acc = account("a", 0, day(10));
        let t = txn("t", "a", day(11), 5);
        assert!(reconstruct_balances(&acc, &[&t], day(0)).is_err());
    }

    fn tiny_tables() -> SourceTables {
        SourceTables {
            clients: vec![ClientRecord {
                client_id: "c1".into(),
                account_links: vec!["a1".into()],
            }],
            accounts: vec![account("a1", 10_000, day(200))],
            transactions: vec![txn("t1", "a1", day(150), 500), txn("t2", "a1", day(160), -200)],
            outcomes: vec![LoanOutcome {
                account_id: "a1".into(),
                application_date: day(180),
                performance: 1,
            }],
        }
    }

    #[test]
    fn join_minimal_bundle() {
        let b = tiny_tables().join().unwrap();
        assert_eq!(b.outcomes.len(), 1);
        assert_eq!(b.account_transactions("a1").len(), 2);
        assert!(b.is_labeled("a1"));
        let s = &b.balances["a1"];
        assert_eq!(s.start_date, day(60));
        assert_eq!(s.balance_on(day(200)), Some(Cents(10_000)));
    }

    #[test]
    fn join_rejects_unknown_account() {
        let mut t = tiny_tables();
        t.transactions.push(txn("t3", "zz", day(1), 1));
        let err = t.join().unwrap_err();
        assert!(matches!(err, Error::UnknownAccount { table: "transactions", .. }));

        let mut t = tiny_tables();
        t.outcomes.push(LoanOutcome {
            account_id: "zz".into(),
            application_date: day(1),
            performance: 0,
        });
        assert!(matches!(t.join().unwrap_err(), Error::UnknownAccount { table: "loans", .. }));
    }

    #[test]
    fn shared_account_appears_once() {
        let mut t = tiny_tables();
        t.clients.push(ClientRecord {
            client_id: "c2".into(),
            account_links: vec!["a1".into()],
        });
        let b = t.join().unwrap();
        assert_eq!(b.accounts.len(), 1);
        assert_eq!(validate_bundle(&b).shared_accounts, 1);
    }

    #[test]
    fn snapshot_before_application_is_rejected() {
        let mut t = tiny_tables();
        t.outcomes[0].application_date = day(201);
        assert!(matches!(t.join().unwrap_err(), Error::InvalidData(_)));
    }

    #[test]
    fn unlabeled_accounts_are_kept() {
        let mut t = tiny_tables();
        t.accounts.push(account("a2", 0, day(200)));
        let b = t.join().unwrap();
        assert_eq!(b.unlabeled_accounts(), vec!["a2"]);
        assert_eq!(b.accounts.len(), 2);
    }

    #[test]
    fn join_is_idempotent() {
        let a = tiny_tables().join().unwrap();
        let b = tiny_tables().join().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sanity_report_echoes_extremes() {
        let b = tiny_tables().join().unwrap();
        let r = validate_bundle(&b);
        assert_eq!(r.min_balance, Some(100.0));
        assert_eq!(r.max_balance, Some(100.0));
        assert_eq!(r.min_transaction, Some(-2.0));
        assert_eq!(r.max_transaction, Some(5.0));
        assert_eq!(r.n_bad, 1);
        assert_eq!(r.bad_fraction, 1.0);
        assert_eq!(r.min_daily_balance, Some(97.0));
    }

    #[test]
    fn grouping_clients_preserves_order() {
        let g = group_clients(vec![
            ("c2".into(), "a1".into()),
            ("c1".into(), "a1".into()),
            ("c2".into(), "a2".into()),
        ]);
        assert_eq!(g[0].client_id, "c2");
        assert_eq!(g[0].account_links, vec!["a1", "a2"]);
        assert_eq!(g[1].client_id, "c1");
    }
}
