//! Applies every resampling strategy to the training split and checks that
//! each synthetic row lies on the segment between its two parents.
//!
//! ```text
//! cargo run --example resample
//! ```

use creditshap::metrics::train_test_split;
use creditshap::resampling::{resample, ResamplingKind, ResamplingStrategy};
use creditshap::synthetic::{planted_signal, PlantedConfig};

fn main() -> creditshap::Result<()> {
    let data = planted_signal(&PlantedConfig {
        missing_share: 0.0,
        ..Default::default()
    })?;
    let (train, _test) = train_test_split(&data, 0.75, 3, true)?;
    println!("{:<18} {:>7} {:>7} {:>10} {:>10}", "strategy", "good", "bad", "good mass", "bad mass");
    for kind in ResamplingKind::ALL {
        let (out, report) = resample(&train, &ResamplingStrategy::new(kind, 3))?;
        let d = out.data();
        let mass = |label: u8| -> f64 { d.y.iter().zip(&d.weights).filter(|(y, _)| **y == label).map(|(_, w)| w).sum() };
        println!(
            "{:<18} {:>7} {:>7} {:>10.1} {:>10.1}",
            kind.label(),
            report.output_counts.0,
            report.output_counts.1,
            mass(0),
            mass(1)
        );

        let n_real = d.n_rows() - report.synthetic.len();
        let src = train.data();
        let worst = report
            .synthetic
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let row = d.x.row(n_real + i);
                (0..d.n_features())
                    .map(|j| {
                        let (a, b) = (src.x[[o.base, j]], src.x[[o.neighbor, j]]);
                        (row[j] - (a + o.lambda * (b - a))).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if !report.synthetic.is_empty() {
            println!("{:<18} {} synthetic rows, max distance from segment {worst:.1e}", "", report.synthetic.len());
        }
    }
    Ok(())
}
