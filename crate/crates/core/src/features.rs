//! Windowed KPI features per loan application.
//!
//! Every labeled application gets 26 KPIs per window (18 transaction
//! aggregates and 8 balance aggregates) plus two horizon-wide counts. With the
//! four canonical windows this yields 106 columns named
//! `trx_{stat}_{direction}_{window}` and `acc_bal_{stat}_{window}`.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DailyBalanceSeries, LedgerBundle, TransactionRecord};

/// A half-open range of day offsets `[lo, hi)` before the application date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub label: String,
    pub lo: i64,
    pub hi: i64,
}

impl WindowSpec {
    pub fn new(label: impl Into<String>, lo: i64, hi: i64) -> Result<Self> {
        if lo < 0 || lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "window requires 0 <= lo < hi, got [{lo}, {hi})"
            )));
        }
        Ok(WindowSpec {
            label: label.into(),
            lo,
            hi,
        })
    }

    /// `last30`, `30_60`, `60_90`, `90_120`.
    pub fn canonical() -> Vec<WindowSpec> {
        vec![
            WindowSpec::new("last30", 0, 30).unwrap(),
            WindowSpec::new("30_60", 30, 60).unwrap(),
            WindowSpec::new("60_90", 60, 90).unwrap(),
            WindowSpec::new("90_120", 90, 120).unwrap(),
        ]
    }

    pub fn contains_offset(&self, offset: i64) -> bool {
        self.lo <= offset && offset < self.hi
    }

    /// Oldest and newest calendar day covered by the window.
    pub fn date_range(&self, application_date: NaiveDate) -> (NaiveDate, NaiveDate) {
        (
            application_date - chrono::Duration::days(self.hi - 1),
            application_date - chrono::Duration::days(self.lo),
        )
    }
}

/// Transactions with `lo <= application_date - date < hi`.
pub fn window_slice<'a>(
    txns: &[&'a TransactionRecord],
    application_date: NaiveDate,
    spec: &WindowSpec,
) -> Vec<&'a TransactionRecord> {
    txns.iter()
        .copied()
        .filter(|t| spec.contains_offset((application_date - t.date).num_days()))
        .collect()
}

/// Daily balances falling inside the window, oldest first. Days outside the
/// reconstructed series are skipped.
pub fn window_balances(series: &DailyBalanceSeries, application_date: NaiveDate, spec: &WindowSpec) -> Vec<f64> {
    let (first, last) = spec.date_range(application_date);
    let mut out = Vec::new();
    let mut day = first;
    while day <= last {
        if let Some(b) = series.balance_on(day) {
            out.push(b.as_f64());
        }
        day = day.succ_opt().expect("date overflow");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrxStat {
    Min,
    Max,
    Mean,
    Sum,
    Count,
    Std,
}

impl TrxStat {
    pub const ALL: [TrxStat; 6] = [
        TrxStat::Min,
        TrxStat::Max,
        TrxStat::Mean,
        TrxStat::Sum,
        TrxStat::Count,
        TrxStat::Std,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrxStat::Min => "min",
            TrxStat::Max => "max",
            TrxStat::Mean => "mean",
            TrxStat::Sum => "sum",
            TrxStat::Count => "count",
            TrxStat::Std => "std",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Incoming,
    Outgoing,
    All,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Incoming, Direction::Outgoing, Direction::All];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Incoming => "incoming",
            Direction::Outgoing => "outgoing",
            Direction::All => "all",
        }
    }

    fn accepts(self, amount: f64) -> bool {
        match self {
            Direction::Incoming => amount > 0.0,
            Direction::Outgoing => amount < 0.0,
            Direction::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceStat {
    Var,
    MaxPos,
    MaxNeg,
    Min,
    Max,
    Mean,
    Std,
    Slope,
}

impl BalanceStat {
    pub const ALL: [BalanceStat; 8] = [
        BalanceStat::Var,
        BalanceStat::MaxPos,
        BalanceStat::MaxNeg,
        BalanceStat::Min,
        BalanceStat::Max,
        BalanceStat::Mean,
        BalanceStat::Std,
        BalanceStat::Slope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BalanceStat::Var => "var",
            BalanceStat::MaxPos => "max_pos",
            BalanceStat::MaxNeg => "max_neg",
            BalanceStat::Min => "min",
            BalanceStat::Max => "max",
            BalanceStat::Mean => "mean",
            BalanceStat::Std => "std",
            BalanceStat::Slope => "slope",
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Aggregates signed transaction amounts after a direction filter.
///
/// `count` is 0 on an empty filter; every other statistic is `None`.
pub fn aggregate_transactions(amounts: &[f64], stat: TrxStat, direction: Direction) -> Option<f64> {
    let filtered: Vec<f64> = amounts.iter().copied().filter(|&a| direction.accepts(a)).collect();
    if stat == TrxStat::Count {
        return Some(filtered.len() as f64);
    }
    if filtered.is_empty() {
        return None;
    }
    Some(match stat {
        TrxStat::Min => filtered.iter().copied().fold(f64::INFINITY, f64::min),
        TrxStat::Max => filtered.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        TrxStat::Mean => mean(&filtered),
        TrxStat::Sum => filtered.iter().sum(),
        TrxStat::Std => population_std(&filtered),
        TrxStat::Count => unreachable!(),
    })
}

/// Aggregates a window of daily balances (oldest first). `None` when the
/// window has no balance data.
pub fn aggregate_balance(balances: &[f64], stat: BalanceStat) -> Option<f64> {
    if balances.is_empty() {
        return None;
    }
    let min = balances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = balances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(match stat {
        BalanceStat::Var => balances[balances.len() - 1] - balances[0],
        BalanceStat::MaxPos => max.max(0.0),
        BalanceStat::MaxNeg => min.min(0.0).abs(),
        BalanceStat::Min => min,
        BalanceStat::Max => max,
        BalanceStat::Mean => mean(balances),
        BalanceStat::Std => population_std(balances),
        BalanceStat::Slope => least_squares_slope(balances),
    })
}

/// Ordinary least-squares slope of `values` against `0, 1, 2, ...`.
fn least_squares_slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = mean(values);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// KPI grid configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub windows: Vec<WindowSpec>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            windows: WindowSpec::canonical(),
        }
    }
}

impl FeatureConfig {
    pub fn horizon(&self) -> i64 {
        self.windows.iter().map(|w| w.hi).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidArgument("at least one window is required".into()));
        }
        let mut labels = HashSet::new();
        for w in &self.windows {
            if w.lo < 0 || w.lo >= w.hi {
                return Err(Error::InvalidArgument(format!("window `{}` has lo >= hi", w.label)));
            }
            if !labels.insert(w.label.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate window label `{}`", w.label)));
            }
        }
        Ok(())
    }

    pub fn total_count_column(&self) -> String {
        format!("trx_count_all_last{}", self.horizon())
    }

    pub fn active_days_column(&self) -> String {
        format!("trx_active_days_last{}", self.horizon())
    }

    /// Column names in matrix order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for w in &self.windows {
            for stat in TrxStat::ALL {
                for dir in Direction::ALL {
                    names.push(format!("trx_{}_{}_{}", stat.name(), dir.name(), w.label));
                }
            }
            for stat in BalanceStat::ALL {
                names.push(format!("acc_bal_{}_{}", stat.name(), w.label));
            }
        }
        names.push(self.total_count_column());
        names.push(self.active_days_column());
        names
    }
}

/// Named numeric matrix, one row per account application. Missing values are
/// stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<f64>,
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(row_ids: Vec<String>, columns: Vec<String>, values: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        if values.nrows() != row_ids.len() || values.nrows() != labels.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} rows, {} row ids, {} labels",
                values.nrows(),
                row_ids.len(),
                labels.len()
            )));
        }
        if values.ncols() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} value columns but {} names",
                values.ncols(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::SchemaMismatch(format!("duplicate column `{c}`")));
            }
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidData("labels must be 0 or 1".into()));
        }
        Ok(FeatureMatrix {
            row_ids,
            columns,
            values,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[[row, col]];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.values[[row, col]].is_nan()
    }

    pub fn column(&self, col: usize) -> ArrayView1<'_, f64> {
        self.values.column(col)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: self.row_ids.clone(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            values: self.values.select(Axis(1), cols),
            labels: self.labels.clone(),
        }
    }

    /// Keeps the named columns, in the order given.
    pub fn select_named(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("unknown column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            columns: self.columns.clone(),
            values: self.values.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let bad = self.labels.iter().filter(|&&y| y == 1).count();
        (self.labels.len() - bad, bad)
    }

    /// CSV with the KPI names as header plus a trailing `performance` column.
    /// Missing values are empty fields.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        header.push("performance");
        w.write_record(&header).map_err(csv_err)?;
        for (r, row) in self.values.rows().into_iter().enumerate() {
            let mut fields: Vec<String> = row
                .iter()
                .map(|v| if v.is_nan() { String::new() } else { v.to_string() })
                .collect();
            fields.push(self.labels[r].to_string());
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> FeatureMatrixJson {
        FeatureMatrixJson {
            version: 1,
            row_ids: self.row_ids.clone(),
            columns: self.columns.clone(),
            values: self
                .values
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| (!v.is_nan()).then_some(*v)).collect())
                .collect(),
            missing_mask: self
                .values
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.is_nan()).collect())
                .collect(),
            performance: self.labels.clone(),
        }
    }

    pub fn from_json(json: FeatureMatrixJson) -> Result<Self> {
        let n = json.values.len();
        let p = json.columns.len();
        let mut values = Array2::from_elem((n, p), f64::NAN);
        for (r, row) in json.values.iter().enumerate() {
            if row.len() != p {
                return Err(Error::SchemaMismatch(format!("row {r} has {} values, expected {p}", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    values[[r, c]] = *v;
                }
            }
        }
        FeatureMatrix::new(json.row_ids, json.columns, values, json.performance)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_json())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(serde_json::from_str(&text)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidData(e.to_string())
}

/// JSON form of a [`FeatureMatrix`], with an explicit missing mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrixJson {
    pub version: u32,
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub missing_mask: Vec<Vec<bool>>,
    pub performance: Vec<u8>,
}

fn row_features(
    config: &FeatureConfig,
    txns: &[&TransactionRecord],
    series: Option<&DailyBalanceSeries>,
    application_date: NaiveDate,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(config.windows.len() * 26 + 2);
    for w in &config.windows {
        let amounts: Vec<f64> = window_slice(txns, application_date, w)
            .iter()
            .map(|t| t.amount.as_f64())
            .collect();
        for stat in TrxStat::ALL {
            for dir in Direction::ALL {
                out.push(aggregate_transactions(&amounts, stat, dir).unwrap_or(f64::NAN));
            }
        }
        let balances = series
            .map(|s| window_balances(s, application_date, w))
            .unwrap_or_default();
        for stat in BalanceStat::ALL {
            out.push(aggregate_balance(&balances, stat).unwrap_or(f64::NAN));
        }
    }
    let horizon = WindowSpec {
        label: String::new(),
        lo: 0,
        hi: config.horizon(),
    };
    let in_horizon = window_slice(txns, application_date, &horizon);
    out.push(in_horizon.len() as f64);
    let active: BTreeSet<NaiveDate> = in_horizon.iter().map(|t| t.date).collect();
    out.push(active.len() as f64);
    out
}

/// Builds one row per labeled application. Unlabeled accounts are skipped.
pub fn build_feature_matrix(bundle: &LedgerBundle) -> Result<FeatureMatrix> {
    build_feature_matrix_with(bundle, &FeatureConfig::default())
}

pub fn build_feature_matrix_with(bundle: &LedgerBundle, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    if bundle.outcomes.is_empty() {
        return Err(Error::EmptyDataset("no labeled accounts to featurize".into()));
    }
    let columns = config.column_names();
    let rows: Vec<Vec<f64>> = bundle
        .outcomes
        .par_iter()
        .map(|o| {
            let txns = bundle.account_transactions(&o.account_id);
            row_features(config, &txns, bundle.balances.get(&o.account_id), o.application_date)
        })
        .collect();
    let mut values = Array2::from_elem((rows.len(), columns.len()), f64::NAN);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            values[[r, c]] = *v;
        }
    }
    let row_ids = bundle
        .outcomes
        .iter()
        .map(|o| format!("{}@{}", o.account_id, o.application_date))
        .collect();
    let labels = bundle.outcomes.iter().map(|o| o.performance).collect();
    FeatureMatrix::new(row_ids, columns, values, labels)
}

/// Removes rows with no transaction in the whole horizon.
pub fn drop_inactive_accounts(matrix: &FeatureMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let col = matrix
        .column_index(&config.total_count_column())
        .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{}`", config.total_count_column())))?;
    let keep: Vec<usize> = (0..matrix.n_rows())
        .filter(|&r| matrix.get(r, col).unwrap_or(0.0) > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset("every account is inactive over the horizon".into()));
    }
    Ok(matrix.select_rows(&keep))
}

/// Per-column medians of the non-missing values, for imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub medians: Vec<f64>,
}

impl Imputer {
    pub fn fit(values: &Array2<f64>) -> Self {
        let medians = values
            .columns()
            .into_iter()
            .map(|col| {
                let mut v: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
                if v.is_empty() {
                    return 0.0;
                }
                v.sort_by(f64::total_cmp);
                let n = v.len();
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            })
            .collect();
        Imputer { medians }
    }

    pub fn transform(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        if values.ncols() != self.medians.len() {
            return Err(Error::SchemaMismatch(format!(
                "imputer fitted on {} columns, got {}",
                self.medians.len(),
                values.ncols()
            )));
        }
        let mut out = values.clone();
        for (mut col, &m) in out.columns_mut().into_iter().zip(&self.medians) {
            col.mapv_inplace(|v| if v.is_nan() { m } else { v });
        }
        Ok(out)
    }
}

/// Per-column mean and population standard deviation (`z = (x - mu) / sigma`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero variance; passed through unscaled.
    pub constant: Vec<bool>,
}

impl ScalerParams {
    /// Fits on non-missing values of each column.
    pub fn fit(values: &Array2<f64>) -> Self {
        let mut mean = Vec::with_capacity(values.ncols());
        let mut std = Vec::with_capacity(values.ncols());
        let mut constant = Vec::with_capacity(values.ncols());
        for col in values.columns() {
            let v: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
            if v.is_empty() {
                mean.push(0.0);
                std.push(0.0);
                constant.push(true);
                continue;
            }
            let m = self::mean(&v);
            let s = population_std(&v);
            mean.push(m);
            std.push(s);
            constant.push(s == 0.0);
        }
        ScalerParams { mean, std, constant }
    }

    fn check(&self, values: &Array2<f64>) -> Result<()> {
        if values.ncols() != self.mean.len() {
            return Err(Error::SchemaMismatch(format!(
                "scaler fitted on {} columns, got {}",
                self.mean.len(),
                values.ncols()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(values)?;
        let mut out = values.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            if !self.constant[c] {
                let (m, s) = (self.mean[c], self.std[c]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(values)?;
        let mut out = values.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            if !self.constant[c] {
                let (m, s) = (self.mean[c], self.std[c]);
                col.mapv_inplace(|v| v * s + m);
            }
        }
        Ok(out)
    }
}

/// Standardizes every non-constant column of `matrix`.
pub fn standardize(matrix: &FeatureMatrix) -> (FeatureMatrix, ScalerParams) {
    let params = ScalerParams::fit(&matrix.values);
    let values = params.transform(&matrix.values).expect("fitted on the same matrix");
    (
        FeatureMatrix {
            values,
            ..matrix.clone()
        },
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{join_bundle, AccountRecord, Cents, ClientRecord, LoanOutcome};
    use approx::assert_abs_diff_eq;
    use chrono::Duration;
    use ndarray::array;

    fn app() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, 1).unwrap()
    }

    fn txn_before(id: &str, days: i64, amount: i64) -> TransactionRecord {
        TransactionRecord {
            transaction_id: id.into(),
            account_id: "a".into(),
            date: app() - Duration::days(days),
            amount: Cents(amount),
        }
    }

    #[test]
    fn window_boundaries_are_half_open() {
        let windows = WindowSpec::canonical();
        let t15 = txn_before("t15", 15, 100);
        let t30 = txn_before("t30", 30, 100);
        let t121 = txn_before("t121", 121, 100);
        let all = [&t15, &t30, &t121];
        assert_eq!(window_slice(&all, app(), &windows[0]).len(), 1);
        assert_eq!(window_slice(&all, app(), &windows[0])[0].transaction_id, "t15");
        assert_eq!(window_slice(&all, app(), &windows[1])[0].transaction_id, "t30");
        for w in &windows {
            assert!(window_slice(&[&t121], app(), w).is_empty());
        }
    }

    #[test]
    fn window_spec_rejects_bad_bounds() {
        assert!(WindowSpec::new("x", 5, 5).is_err());
        assert!(WindowSpec::new("x", -1, 5).is_err());
    }

    #[test]
    fn transaction_aggregates() {
        let amounts = [50.0, -20.0, 10.0];
        assert_eq!(aggregate_transactions(&amounts, TrxStat::Min, Direction::Incoming), Some(10.0));
        assert_eq!(aggregate_transactions(&amounts, TrxStat::Sum, Direction::Outgoing), Some(-20.0));
        assert_eq!(aggregate_transactions(&amounts, TrxStat::Count, Direction::All), Some(3.0));
        assert_eq!(aggregate_transactions(&[], TrxStat::Count, Direction::All), Some(0.0));
        assert_eq!(aggregate_transactions(&[], TrxStat::Mean, Direction::All), None);
        assert_eq!(aggregate_transactions(&amounts, TrxStat::Std, Direction::Outgoing), Some(0.0));
    }

    #[test]
    fn balance_aggregates() {
        let b = [100.0, 120.0, 90.0];
        assert_eq!(aggregate_balance(&b, BalanceStat::Var), Some(-10.0));
        assert_eq!(aggregate_balance(&b, BalanceStat::MaxPos), Some(120.0));
        assert_eq!(aggregate_balance(&b, BalanceStat::MaxNeg), Some(0.0));
        let neg = [-50.0, -10.0];
        assert_eq!(aggregate_balance(&neg, BalanceStat::MaxNeg), Some(50.0));
        assert_eq!(aggregate_balance(&neg, BalanceStat::MaxPos), Some(0.0));
        assert_eq!(aggregate_balance(&[], BalanceStat::Mean), None);
    }

    #[test]
    fn slope_of_linear_series_is_one() {
        let linear: Vec<f64> = (0..30).map(f64::from).collect();
        // closed form: cov(x, x) / var(x) = 1
        assert_abs_diff_eq!(aggregate_balance(&linear, BalanceStat::Slope).unwrap(), 1.0, epsilon = 1e-9);
        let shifted: Vec<f64> = (0..30).map(|i| 7.0 - 2.5 * i as f64).collect();
        assert_abs_diff_eq!(aggregate_balance(&shifted, BalanceStat::Slope).unwrap(), -2.5, epsilon = 1e-9);
    }

    fn one_txn_bundle(txns: Vec<TransactionRecord>) -> LedgerBundle {
        join_bundle(
            vec![ClientRecord {
                client_id: "c".into(),
                account_links: vec!["a".into()],
            }],
            vec![AccountRecord {
                account_id: "a".into(),
                snapshot_balance: Cents(5_000),
                snapshot_date: app(),
            }],
            txns,
            vec![LoanOutcome {
                account_id: "a".into(),
                application_date: app(),
                performance: 0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn grid_has_106_columns_with_appendix_names() {
        let names = FeatureConfig::default().column_names();
        assert_eq!(names.len(), 106);
        for expected in [
            "trx_min_incoming_90_120",
            "acc_bal_max_neg_30_60",
            "acc_bal_max_pos_60_90",
            "acc_bal_var_90_120",
            "trx_count_all_last30",
            "trx_max_outgoing_60_90",
            "trx_sum_incoming_60_90",
            "trx_mean_incoming_30_60",
            "trx_min_outgoing_last30",
        ] {
            assert!(names.iter().any(|n| n == expected), "{expected} missing");
        }
    }

    #[test]
    fn single_transaction_account() {
        let m = build_feature_matrix(&one_txn_bundle(vec![txn_before("t", 5, 1_000)])).unwrap();
        assert_eq!(m.n_cols(), 106);
        let v = |name: &str| m.get(0, m.column_index(name).unwrap());
        assert_eq!(v("trx_min_incoming_last30"), Some(10.0));
        for stat in TrxStat::ALL {
            for dir in Direction::ALL {
                let name = format!("trx_{}_{}_90_120", stat.name(), dir.name());
                if stat == TrxStat::Count {
                    assert_eq!(v(&name), Some(0.0));
                } else {
                    assert_eq!(v(&name), None, "{name}");
                }
            }
        }
        assert_eq!(v("trx_count_all_last120"), Some(1.0));
        assert_eq!(v("trx_active_days_last120"), Some(1.0));
        assert_eq!(v("acc_bal_var_last30"), Some(10.0));
        assert_eq!(v("acc_bal_var_30_60"), Some(0.0));
    }

    #[test]
    fn zero_labeled_accounts_is_an_error() {
        let mut b = one_txn_bundle(vec![]);
        b.outcomes.clear();
        assert!(matches!(build_feature_matrix(&b), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn drop_inactive() {
        let cfg = FeatureConfig::default();
        let active = build_feature_matrix(&one_txn_bundle(vec![txn_before("t", 5, 1_000)])).unwrap();
        assert_eq!(drop_inactive_accounts(&active, &cfg).unwrap().n_rows(), 1);
        let inactive = build_feature_matrix(&one_txn_bundle(vec![txn_before("t", 200, 1_000)])).unwrap();
        assert!(matches!(drop_inactive_accounts(&inactive, &cfg), Err(Error::EmptyDataset(_))));

        let mut values = Array2::zeros((10, 1));
        for r in 0..8 {
            values[[r, 0]] = 1.0 + r as f64;
        }
        let m = FeatureMatrix::new(
            (0..10).map(|i| i.to_string()).collect(),
            vec![cfg.total_count_column()],
            values,
            vec![0; 10],
        )
        .unwrap();
        assert_eq!(drop_inactive_accounts(&m, &cfg).unwrap().n_rows(), 8);
    }

    #[test]
    fn standardize_small_column() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "k".into()],
            array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]],
            vec![0, 1, 0],
        )
        .unwrap();
        let (z, params) = standardize(&m);
        // (x - 2) / sqrt(2/3)
        assert_abs_diff_eq!(z.values[[0, 0]], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(z.values[[1, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z.values[[2, 0]], 1.2247, epsilon = 1e-4);
        assert!(params.constant[1]);
        assert_eq!(z.column(1).to_vec(), vec![5.0, 5.0, 5.0]);

        let probe = array![[2.0, 5.0]];
        let scaled = params.transform(&probe).unwrap();
        assert_eq!(scaled[[0, 0]], 0.0);
        assert_eq!(scaled[[0, 1]], 5.0);
    }

    #[test]
    fn imputer_uses_median() {
        let x = array![[1.0, f64::NAN], [f64::NAN, 4.0], [3.0, 2.0], [10.0, f64::NAN]];
        let imp = Imputer::fit(&x);
        assert_eq!(imp.medians, vec![3.0, 3.0]);
        let t = imp.transform(&x).unwrap();
        assert_eq!(t[[1, 0]], 3.0);
        assert_eq!(t[[0, 1]], 3.0);
    }

    #[test]
    fn json_round_trip_keeps_missing() {
        let m = FeatureMatrix::new(
            vec!["r".into()],
            vec!["a".into(), "b".into()],
            array![[f64::NAN, 2.5]],
            vec![1],
        )
        .unwrap();
        let j = m.to_json();
        assert_eq!(j.missing_mask, vec![vec![true, false]]);
        let back = FeatureMatrix::from_json(serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap()).unwrap();
        assert!(back.is_missing(0, 0));
        assert_eq!(back.get(0, 1), Some(2.5));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,performance\n,2.5,1\n");
    }
}
