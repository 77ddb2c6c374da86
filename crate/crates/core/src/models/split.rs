//! Feature pre-binning and histogram split search shared by the tree learners.

use ndarray::Array2;

pub(crate) const MISSING_BIN: u16 = u16::MAX;
pub(crate) const DEFAULT_MAX_BINS: usize = 256;

/// Candidate thresholds per feature and each row's bin.
///
/// Bin `b` holds values `v` with `thresholds[b - 1] < v <= thresholds[b]`, so
/// `bin <= b` is equivalent to `v <= thresholds[b]`.
#[derive(Debug, Clone)]
pub(crate) struct BinnedFeatures {
    pub thresholds: Vec<Vec<f64>>,
    /// Column-major: `bins[feature][row]`.
    pub bins: Vec<Vec<u16>>,
}

impl BinnedFeatures {
    pub fn new(x: &Array2<f64>, max_bins: usize) -> Self {
        let max_thresholds = max_bins.clamp(2, MISSING_BIN as usize) - 1;
        let mut thresholds = Vec::with_capacity(x.ncols());
        let mut bins = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut distinct: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let mids: Vec<f64> = distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
            let chosen = if mids.len() <= max_thresholds {
                mids
            } else {
                // Quantile-spaced subset of the midpoints.
                let mut picked: Vec<f64> = (1..=max_thresholds)
                    .map(|k| mids[(k * mids.len()) / (max_thresholds + 1)])
                    .collect();
                picked.dedup();
                picked
            };
            let col_bins = col
                .iter()
                .map(|&v| {
                    if v.is_nan() {
                        MISSING_BIN
                    } else {
                        chosen.partition_point(|&t| t < v) as u16
                    }
                })
                .collect();
            thresholds.push(chosen);
            bins.push(col_bins);
        }
        BinnedFeatures { thresholds, bins }
    }

    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    /// Does row `row` go left under split `(feature, threshold index)`?
    pub fn goes_left(&self, row: usize, feature: usize, bin: usize, missing_left: bool) -> bool {
        let b = self.bins[feature][row];
        if b == MISSING_BIN {
            missing_left
        } else {
            (b as usize) <= bin
        }
    }
}

/// Additive statistics of a set of rows: `a`, `b` are criterion sums (gradient
/// and hessian, or positive weight), `w` the cover, `n` the row count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Stats {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub n: usize,
}

impl Stats {
    pub fn add(&mut self, o: &Stats) {
        self.a += o.a;
        self.b += o.b;
        self.w += o.w;
        self.n += o.n;
    }

    pub fn sub(&self, o: &Stats) -> Stats {
        Stats {
            a: self.a - o.a,
            b: self.b - o.b,
            w: self.w - o.w,
            n: self.n - o.n,
        }
    }

    pub fn plus(&self, o: &Stats) -> Stats {
        let mut s = *self;
        s.add(o);
        s
    }
}

/// Per-bin statistics for one feature over a node's rows.
#[derive(Debug, Clone)]
pub(crate) struct Histogram {
    pub bins: Vec<Stats>,
    pub missing: Stats,
}

impl Histogram {
    pub fn build(binned: &BinnedFeatures, feature: usize, rows: &[usize], row_stats: &[Stats]) -> Histogram {
        let mut bins = vec![Stats::default(); binned.n_bins(feature)];
        let mut missing = Stats::default();
        let col = &binned.bins[feature];
        for &r in rows {
            let b = col[r];
            if b == MISSING_BIN {
                missing.add(&row_stats[r]);
            } else {
                bins[b as usize].add(&row_stats[r]);
            }
        }
        Histogram { bins, missing }
    }

    /// Candidate splits as `(bin, missing_left, left, right)`. Missing rows go
    /// to the side with the larger non-missing cover (left on ties).
    pub fn candidates(&self) -> impl Iterator<Item = (usize, bool, Stats, Stats)> + '_ {
        let total: Stats = self.bins.iter().fold(Stats::default(), |acc, s| acc.plus(s));
        let mut left = Stats::default();
        let last = self.bins.len().saturating_sub(1);
        self.bins[..last].iter().enumerate().map(move |(b, s)| {
            left.add(s);
            let right = total.sub(&left);
            let missing_left = left.w >= right.w;
            if missing_left {
                (b, true, left.plus(&self.missing), right)
            } else {
                (b, false, left, right.plus(&self.missing))
            }
        })
    }
}

/// Newton-gain score of a leaf with gradient sum `a`, hessian sum `b`.
pub(crate) fn newton_score(s: &Stats, l2: f64) -> f64 {
    s.a * s.a / (s.b + l2)
}

/// Negative weighted Gini impurity, up to a constant: `a` is the positive
/// weight, `w` the total weight.
pub(crate) fn gini_score(s: &Stats) -> f64 {
    if s.w <= 0.0 {
        return 0.0;
    }
    (s.a * s.a + (s.w - s.a) * (s.w - s.a)) / s.w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub bin: usize,
    pub missing_left: bool,
    pub gain: f64,
    pub left: Stats,
    pub right: Stats,
}

/// Best split of one node over `features`, or `None` when no candidate
/// satisfies `min_rows` on both sides or has positive gain.
pub(crate) fn best_split(
    binned: &BinnedFeatures,
    features: &[usize],
    rows: &[usize],
    row_stats: &[Stats],
    min_rows: usize,
    score: impl Fn(&Stats) -> f64,
) -> Option<SplitChoice> {
    let mut parent = Stats::default();
    for &r in rows {
        parent.add(&row_stats[r]);
    }
    let parent_score = score(&parent);
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let hist = Histogram::build(binned, f, rows, row_stats);
        for (bin, missing_left, left, right) in hist.candidates() {
            if left.n < min_rows || right.n < min_rows {
                continue;
            }
            let gain = score(&left) + score(&right) - parent_score;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    bin,
                    missing_left,
                    gain,
                    left,
                    right,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bins_respect_threshold_order() {
        let x = array![[1.0], [2.0], [2.0], [5.0], [f64::NAN]];
        let b = BinnedFeatures::new(&x, 256);
        assert_eq!(b.thresholds[0], vec![1.5, 3.5]);
        assert_eq!(b.bins[0], vec![0, 1, 1, 2, MISSING_BIN]);
        assert!(b.goes_left(1, 0, 1, false));
        assert!(!b.goes_left(3, 0, 1, false));
        assert!(b.goes_left(4, 0, 1, true));
    }

    #[test]
    fn thresholds_are_capped() {
        let x = ndarray::Array2::from_shape_fn((1000, 1), |(i, _)| i as f64);
        let b = BinnedFeatures::new(&x, 16);
        assert!(b.n_bins(0) <= 16);
        // Every row's bin agrees with the threshold comparison.
        for r in 0..1000 {
            let bin = b.bins[0][r] as usize;
            if bin > 0 {
                assert!(r as f64 > b.thresholds[0][bin - 1]);
            }
            if bin < b.thresholds[0].len() {
                assert!(r as f64 <= b.thresholds[0][bin]);
            }
        }
    }

    #[test]
    fn gini_split_separates_classes() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let b = BinnedFeatures::new(&x, 256);
        let y = [0.0, 0.0, 1.0, 1.0];
        let stats: Vec<Stats> = y.iter().map(|&v| Stats { a: v, b: 0.0, w: 1.0, n: 1 }).collect();
        let s = best_split(&b, &[0], &[0, 1, 2, 3], &stats, 1, gini_score).unwrap();
        assert_eq!(s.bin, 1);
        assert_eq!(b.thresholds[0][s.bin], 1.5);
        assert_eq!(s.left.n, 2);
    }
}
