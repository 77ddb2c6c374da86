//! Exact TreeSHAP for a boosted model: one waterfall, the global ranking and
//! summary/dependence plot data written as JSON, CSV and SVG.
//!
//! ```text
//! cargo run --release --example explain_shap -- [out_dir]
//! ```

use std::path::PathBuf;

use creditshap::dataset::{Dataset, TrainSet};
use creditshap::explain::{plot_from_shap, shap_matrix, tree_shap, GlobalImportance, PlotKind};
use creditshap::models::{fit_model, sigmoid, ModelKind, TrainConfig};
use creditshap::synthetic::{planted_signal, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "shap_plots".into()));
    let data: Dataset = planted_signal(&PlantedConfig::default())?;
    let model = fit_model(
        ModelKind::ObliviousBoosting,
        &TrainSet::without_holdout(data.clone()),
        &TrainConfig::default(),
        2,
    )?;
    let ensemble = model.tree_ensemble().expect("tree model");

    let row = data.y.iter().position(|&y| y == 1).unwrap_or(0);
    let x: Vec<f64> = data.x.row(row).to_vec();
    let shap = tree_shap(ensemble, &x)?;
    println!(
        "row {row}: base {:.3} + contributions = margin {:.3} (p = {:.3}), additivity error {:.1e}",
        shap.base_value,
        shap.margin,
        sigmoid(shap.margin),
        shap.additivity_error()
    );
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| shap.values[b].abs().total_cmp(&shap.values[a].abs()));
    for &j in order.iter().take(5) {
        println!("  {:<6} = {:>8.3}  shap {:+.4}", data.feature_names[j], x[j], shap.values[j]);
    }

    let all = shap_matrix(ensemble, &data.x)?;
    let importance = GlobalImportance::from_shap(&all)?;
    println!("ranking: {}", importance.ranked_names()[..8].join(", "));

    std::fs::create_dir_all(&out)?;
    let top = importance.ranked_names()[0].to_string();
    let second = importance.ranked_names()[1].to_string();
    let plots = [
        ("summary", PlotKind::Summary),
        (
            "dependence",
            PlotKind::Dependence {
                feature: top,
                color_feature: second,
            },
        ),
        ("waterfall", PlotKind::Waterfall { row }),
    ];
    for (name, kind) in plots {
        let plot = plot_from_shap(&kind, ensemble, &all)?;
        std::fs::write(out.join(format!("{name}.json")), plot.to_json()?)?;
        std::fs::write(out.join(format!("{name}.csv")), plot.to_csv())?;
        std::fs::write(out.join(format!("{name}.svg")), plot.to_svg())?;
    }
    println!("plots in {}", out.display());
    Ok(())
}
