//! Data behind summary, dependence and waterfall plots, as JSON, CSV and a
//! plain static SVG.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{shap_matrix, GlobalImportance, ShapMatrix};
use crate::error::{Error, Result};
use crate::models::tree::TreeEnsemble;

pub const PLOT_FORMAT_VERSION: u32 = 1;
/// Attribution space recorded in every plot dataset.
pub const ATTRIBUTION_SPACE: &str = "margin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlotKind {
    Summary,
    Dependence { feature: String, color_feature: String },
    Waterfall { row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub row: usize,
    pub shap: f64,
    pub value: Option<f64>,
    /// Position of the value within its column, in `[0, 1]`.
    pub percentile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFeature {
    pub feature: String,
    pub importance: f64,
    pub points: Vec<SummaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub row: usize,
    pub value: Option<f64>,
    pub shap: f64,
    pub color_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub value: Option<f64>,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plot", rename_all = "snake_case")]
pub enum PlotBody {
    /// Features in descending importance.
    Summary { features: Vec<SummaryFeature> },
    Dependence {
        feature: String,
        color_feature: String,
        points: Vec<DependencePoint>,
    },
    /// Contributions sorted by decreasing magnitude.
    Waterfall {
        row: usize,
        base_value: f64,
        margin: f64,
        base_probability: f64,
        probability: f64,
        contributions: Vec<Contribution>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub version: u32,
    pub space: String,
    #[serde(flatten)]
    pub body: PlotBody,
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Mid-rank percentile of every non-missing value within its column.
fn percentiles(col: &[f64]) -> Vec<Option<f64>> {
    let mut sorted: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    col.iter()
        .map(|&v| {
            if v.is_nan() {
                return None;
            }
            if n < 2 {
                return Some(0.5);
            }
            let below = sorted.partition_point(|&s| s < v);
            let equal = sorted.partition_point(|&s| s <= v) - below;
            Some((below as f64 + (equal - 1) as f64 / 2.0) / (n - 1) as f64)
        })
        .collect()
}

pub fn emit_explanation_data(kind: &PlotKind, ensemble: &TreeEnsemble, x: &Array2<f64>) -> Result<PlotData> {
    let shap = match kind {
        PlotKind::Waterfall { row } => {
            if *row >= x.nrows() {
                return Err(Error::InvalidArgument(format!("row {row} out of range for {} rows", x.nrows())));
            }
            shap_matrix(ensemble, &x.slice(ndarray::s![*row..*row + 1, ..]).to_owned())?
        }
        _ => shap_matrix(ensemble, x)?,
    };
    plot_from_shap(kind, ensemble, &shap)
}

/// Like [`emit_explanation_data`] for SHAP values already computed on all rows.
pub fn plot_from_shap(kind: &PlotKind, ensemble: &TreeEnsemble, shap: &ShapMatrix) -> Result<PlotData> {
    let feature_index = |name: &str| {
        shap.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{name}`")))
    };
    let body = match kind {
        PlotKind::Summary => {
            let importance = GlobalImportance::from_shap(shap)?;
            let features = importance
                .ranking
                .iter()
                .map(|&c| {
                    let col = shap.features.column(c).to_vec();
                    let pct = percentiles(&col);
                    SummaryFeature {
                        feature: shap.feature_names[c].clone(),
                        importance: importance.importance[c],
                        points: (0..shap.n_rows())
                            .map(|r| SummaryPoint {
                                row: r,
                                shap: shap.values[[r, c]],
                                value: opt(col[r]),
                                percentile: pct[r],
                            })
                            .collect(),
                    }
                })
                .collect();
            PlotBody::Summary { features }
        }
        PlotKind::Dependence { feature, color_feature } => {
            let f = feature_index(feature)?;
            let c = feature_index(color_feature)?;
            PlotBody::Dependence {
                feature: feature.clone(),
                color_feature: color_feature.clone(),
                points: (0..shap.n_rows())
                    .map(|r| DependencePoint {
                        row: r,
                        value: opt(shap.features[[r, f]]),
                        shap: shap.values[[r, f]],
                        color_value: opt(shap.features[[r, c]]),
                    })
                    .collect(),
            }
        }
        PlotKind::Waterfall { row } => {
            // A single-row matrix carries the requested row at index 0.
            let local = if shap.n_rows() == 1 { 0 } else { *row };
            if local >= shap.n_rows() {
                return Err(Error::InvalidArgument(format!("row {row} out of range")));
            }
            let s = shap.row(local);
            let mut contributions: Vec<Contribution> = s
                .values
                .iter()
                .enumerate()
                .map(|(i, &phi)| Contribution {
                    feature: shap.feature_names[i].clone(),
                    value: opt(s.feature_values[i]),
                    shap: phi,
                })
                .collect();
            contributions.sort_by(|a, b| b.shap.abs().total_cmp(&a.shap.abs()));
            PlotBody::Waterfall {
                row: *row,
                base_value: s.base_value,
                margin: s.margin,
                base_probability: ensemble.proba_from_margin(s.base_value),
                probability: ensemble.proba_from_margin(s.margin),
                contributions,
            }
        }
    };
    Ok(PlotData {
        version: PLOT_FORMAT_VERSION,
        space: ATTRIBUTION_SPACE.into(),
        body,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl PlotData {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.body {
            PlotBody::Summary { features } => {
                out.push_str("feature,importance,row,shap,value,percentile\n");
                for f in features {
                    for p in &f.points {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            f.feature,
                            f.importance,
                            p.row,
                            p.shap,
                            cell(p.value),
                            cell(p.percentile)
                        );
                    }
                }
            }
            PlotBody::Dependence { points, .. } => {
                out.push_str("row,value,shap,color_value\n");
                for p in points {
                    let _ = writeln!(out, "{},{},{},{}", p.row, cell(p.value), p.shap, cell(p.color_value));
                }
            }
            PlotBody::Waterfall {
                base_value,
                margin,
                contributions,
                ..
            } => {
                out.push_str("feature,value,shap\n");
                let _ = writeln!(out, "base_value,,{base_value}");
                for c in contributions {
                    let _ = writeln!(out, "{},{},{}", c.feature, cell(c.value), c.shap);
                }
                let _ = writeln!(out, "margin,,{margin}");
            }
        }
        out
    }

    /// Static rendering: importance bars, a dependence scatter, or waterfall
    /// steps from the base value to the margin.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const ROW: f64 = 18.0;
        const LEFT: f64 = 220.0;
        let mut body = String::new();
        let height;
        match &self.body {
            PlotBody::Summary { features } => {
                let max = features.iter().map(|f| f.importance).fold(0.0, f64::max).max(1e-12);
                for (i, f) in features.iter().enumerate() {
                    let y = 10.0 + i as f64 * ROW;
                    let w = (W - LEFT - 20.0) * f.importance / max;
                    let _ = write!(
                        body,
                        r##"<text x="{tx}" y="{ty}" font-size="11" text-anchor="end">{name}</text><rect x="{LEFT}" y="{y}" width="{w:.2}" height="{h}" fill="#1e88e5"/>"##,
                        tx = LEFT - 6.0,
                        ty = y + 12.0,
                        name = escape(&f.feature),
                        h = ROW - 4.0
                    );
                }
                height = 20.0 + features.len() as f64 * ROW;
            }
            PlotBody::Dependence { feature, points, .. } => {
                height = 400.0;
                let xs: Vec<f64> = points.iter().filter_map(|p| p.value).collect();
                let (xmin, xmax) = bounds(&xs);
                let (ymin, ymax) = bounds(&points.iter().map(|p| p.shap).collect::<Vec<_>>());
                let cs: Vec<f64> = points.iter().filter_map(|p| p.color_value).collect();
                let (cmin, cmax) = bounds(&cs);
                for p in points {
                    let Some(v) = p.value else { continue };
                    let px = 40.0 + (W - 60.0) * (v - xmin) / (xmax - xmin);
                    let py = height - 30.0 - (height - 60.0) * (p.shap - ymin) / (ymax - ymin);
                    let t = p.color_value.map_or(0.5, |c| (c - cmin) / (cmax - cmin));
                    let _ = write!(
                        body,
                        r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="rgb({r},{g},{b})"/>"#,
                        r = (255.0 * t) as u8,
                        g = 40,
                        b = (255.0 * (1.0 - t)) as u8
                    );
                }
                let _ = write!(
                    body,
                    r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{name}</text>"#,
                    x = W / 2.0,
                    y = height - 8.0,
                    name = escape(feature)
                );
            }
            PlotBody::Waterfall {
                base_value,
                margin,
                contributions,
                ..
            } => {
                let mut level = *base_value;
                let mut ends = vec![level];
                for c in contributions {
                    level += c.shap;
                    ends.push(level);
                }
                let (lo, hi) = bounds(&ends);
                let scale = |v: f64| LEFT + (W - LEFT - 20.0) * (v - lo) / (hi - lo);
                let mut level = *base_value;
                for (i, c) in contributions.iter().enumerate() {
                    let y = 10.0 + i as f64 * ROW;
                    let (a, b) = (scale(level), scale(level + c.shap));
                    let colour = if c.shap >= 0.0 { "#d81b60" } else { "#1e88e5" };
                    let _ = write!(
                        body,
                        r#"<text x="{tx}" y="{ty}" font-size="11" text-anchor="end">{name}</text><rect x="{x:.2}" y="{y}" width="{w:.2}" height="{h}" fill="{colour}"/>"#,
                        tx = LEFT - 6.0,
                        ty = y + 12.0,
                        name = escape(&c.feature),
                        x = a.min(b),
                        w = (a - b).abs().max(0.5),
                        h = ROW - 4.0
                    );
                    level += c.shap;
                }
                height = 40.0 + contributions.len() as f64 * ROW;
                let _ = write!(
                    body,
                    r#"<text x="{LEFT}" y="{y}" font-size="11">base {base_value:.4} → margin {margin:.4}</text>"#,
                    y = height - 10.0
                );
            }
        }
        format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}">{body}</svg>"#
        )
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
