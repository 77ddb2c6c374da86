//! Feed-forward network with a sigmoid output unit, trained by mini-batch SGD
//! with momentum on weighted cross-entropy.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::dataset::{Dataset, TrainSet};
use crate::error::{Error, Result};
use crate::features::{Imputer, ScalerParams};
use crate::metrics::roc_auc_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => (a > 0.0) as u8 as f64,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 32],
            activation: Activation::Tanh,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
        }
    }
}

/// Median imputation followed by standardization; constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub imputer: Imputer,
    pub scaler: ScalerParams,
}

impl InputScaler {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let imputer = Imputer::fit(x);
        let scaler = ScalerParams::fit(&imputer.transform(x)?);
        Ok(InputScaler { imputer, scaler })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut z = self.scaler.transform(&self.imputer.transform(x)?)?;
        for (c, mut col) in z.columns_mut().into_iter().enumerate() {
            if self.scaler.constant[c] {
                col.fill(0.0);
            }
        }
        Ok(z)
    }
}

/// Dense layer computing `W a + b`; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlpTrace {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub validation_auc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    pub activation: Activation,
    /// Hidden layers followed by the single-unit output layer.
    pub layers: Vec<Layer>,
    pub input: InputScaler,
    pub trace: MlpTrace,
}

impl MlpModel {
    /// Network with Glorot-uniform weights and zero biases.
    pub fn initialize(
        feature_names: Vec<String>,
        hidden: &[usize],
        activation: Activation,
        input: InputScaler,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sizes = vec![feature_names.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((w[1], w[0]), |_| rng.gen_range(-limit..limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        MlpModel {
            feature_names,
            activation,
            layers,
            input,
            trace: MlpTrace::default(),
        }
    }

    /// Activations of every layer for already scaled inputs; the last entry
    /// holds the output margins (before the sigmoid).
    fn forward(&self, z: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![z.clone()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = acts[l].dot(&layer.weights.t()) + &layer.bias;
            if l < last {
                next.mapv_inplace(|v| self.activation.apply(v));
            }
            acts.push(next);
        }
        acts
    }

    pub fn margins_scaled(&self, z: &Array2<f64>) -> Vec<f64> {
        self.forward(z).pop().expect("output layer").column(0).to_vec()
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} columns, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        let z = self.input.transform(x)?;
        Ok(self.margins_scaled(&z).into_iter().map(sigmoid).collect())
    }

    /// Weighted mean cross-entropy on scaled inputs and its gradient with
    /// respect to every layer's weights and biases.
    pub fn loss_and_gradient(&self, z: &Array2<f64>, y: &[u8], w: &[f64]) -> (f64, Vec<Layer>) {
        let acts = self.forward(z);
        let margins = acts.last().expect("output layer").column(0);
        let wsum: f64 = w.iter().sum();
        let mut loss = 0.0;
        let mut delta = Array2::zeros((z.nrows(), 1));
        for i in 0..z.nrows() {
            let m = margins[i];
            let yi = y[i] as f64;
            // softplus(m) - y m, computed stably.
            let softplus = m.max(0.0) + (-m.abs()).exp().ln_1p();
            loss += w[i] * (softplus - yi * m);
            delta[[i, 0]] = w[i] * (sigmoid(m) - yi) / wsum;
        }
        loss /= wsum;

        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&acts[l]);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights);
                back.zip_mut_with(&acts[l], |d, &a| *d *= self.activation.derivative(a));
                delta = back;
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        (loss, grads)
    }
}

pub fn fit_mlp(train: &TrainSet, config: &MlpConfig, input: Option<InputScaler>, seed: u64) -> Result<MlpModel> {
    let input = input.ok_or_else(|| Error::InvalidArgument("the network needs standardized inputs; supply a scaler".into()))?;
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    if !(0.0..=0.5).contains(&config.validation_fraction) {
        return Err(Error::InvalidArgument("validation fraction must be in [0, 0.5]".into()));
    }
    let data: &Dataset = train.data();
    data.require_both_classes("network training")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_all = input.transform(&data.x)?;

    let (fit_rows, valid_rows) = holdout(data, config.validation_fraction, &mut rng);
    let z_fit = z_all.select(Axis(0), &fit_rows);
    let z_valid = z_all.select(Axis(0), &valid_rows);
    let y_fit: Vec<u8> = fit_rows.iter().map(|&i| data.y[i]).collect();
    let w_fit: Vec<f64> = fit_rows.iter().map(|&i| data.weights[i]).collect();
    let y_valid: Vec<u8> = valid_rows.iter().map(|&i| data.y[i]).collect();

    let mut model = MlpModel::initialize(data.feature_names.clone(), &config.hidden, config.activation, input, &mut rng);
    let mut velocity: Vec<Layer> = model
        .layers
        .iter()
        .map(|l| Layer {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.len()),
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, model.layers.clone(), 0);
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..fit_rows.len()).collect();
    let batch = config.batch_size.max(1);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let zb = z_fit.select(Axis(0), chunk);
            let yb: Vec<u8> = chunk.iter().map(|&i| y_fit[i]).collect();
            let wb: Vec<f64> = chunk.iter().map(|&i| w_fit[i]).collect();
            let (_, grads) = model.loss_and_gradient(&zb, &yb, &wb);
            for ((layer, vel), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                vel.weights.zip_mut_with(&g.weights, |v, &gw| *v = config.momentum * *v - config.learning_rate * gw);
                vel.bias.zip_mut_with(&g.bias, |v, &gb| *v = config.momentum * *v - config.learning_rate * gb);
                layer.weights += &vel.weights;
                layer.bias += &vel.bias;
            }
        }
        model.trace.epochs_run = epoch;
        if valid_rows.is_empty() {
            continue;
        }
        let auc = roc_auc_score(&y_valid, &model.margins_scaled(&z_valid))?;
        model.trace.validation_auc.push(auc);
        if auc > best.0 + 1e-12 {
            best = (auc, model.layers.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience.max(1) {
                break;
            }
        }
    }
    if valid_rows.is_empty() {
        model.trace.best_epoch = model.trace.epochs_run;
    } else {
        model.layers = best.1;
        model.trace.best_epoch = best.2;
    }
    Ok(model)
}

fn holdout(data: &Dataset, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..data.n_rows()).collect();
    if fraction <= 0.0 {
        return (all, Vec::new());
    }
    let mut fit = Vec::new();
    let mut valid = Vec::new();
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = all.iter().copied().filter(|&i| data.y[i] == class).collect();
        rows.shuffle(rng);
        let k = (rows.len() as f64 * fraction).round() as usize;
        if k == 0 || k >= rows.len() {
            return (all, Vec::new());
        }
        valid.extend_from_slice(&rows[..k]);
        fit.extend_from_slice(&rows[k..]);
    }
    fit.sort_unstable();
    valid.sort_unstable();
    (fit, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::logistic::{fit_logistic, LogisticConfig};

    fn dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-2.0..2.0));
        let y = (0..n)
            .map(|i| {
                let eta = 1.5 * x[[i, 0]] - 1.0 * x[[i, 1 % p]] + 0.3;
                (rng.gen::<f64>() < sigmoid(eta)) as u8
            })
            .collect();
        Dataset::new(x, y, (0..p).map(|j| format!("f{j}")).collect()).unwrap()
    }

    #[test]
    fn missing_scaler_is_rejected() {
        let t = TrainSet::without_holdout(dataset(50, 2, 1));
        assert!(fit_mlp(&t, &MlpConfig::default(), None, 0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = dataset(5, 3, 2);
        let input = InputScaler::fit(&data.x).unwrap();
        let z = input.transform(&data.x).unwrap();
        let w = vec![1.0, 2.0, 0.5, 1.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = MlpModel::initialize(data.feature_names.clone(), &[4, 3], Activation::Tanh, input, &mut rng);
        let (_, grads) = model.loss_and_gradient(&z, &data.y, &w);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for l in 0..model.layers.len() {
            let (rows, cols) = model.layers[l].weights.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = model.clone();
                    plus.layers[l].weights[[r, c]] += h;
                    let mut minus = model.clone();
                    minus.layers[l].weights[[r, c]] -= h;
                    let numeric = (plus.loss_and_gradient(&z, &data.y, &w).0
                        - minus.loss_and_gradient(&z, &data.y, &w).0)
                        / (2.0 * h);
                    let analytic = grads[l].weights[[r, c]];
                    let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
                    worst = worst.max(rel);
                }
                let mut plus = model.clone();
                plus.layers[l].bias[r] += h;
                let mut minus = model.clone();
                minus.layers[l].bias[r] -= h;
                let numeric =
                    (plus.loss_and_gradient(&z, &data.y, &w).0 - minus.loss_and_gradient(&z, &data.y, &w).0) / (2.0 * h);
                let analytic = grads[l].bias[r];
                worst = worst.max((numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8));
            }
        }
        assert!(worst < 1e-4, "relative error {worst}");
    }

    #[test]
    fn constant_columns_get_zero_first_layer_gradient() {
        let mut data = dataset(40, 3, 3);
        data.x.column_mut(2).fill(7.0);
        let input = InputScaler::fit(&data.x).unwrap();
        let z = input.transform(&data.x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpModel::initialize(data.feature_names.clone(), &[5], Activation::Tanh, input, &mut rng);
        let (_, grads) = model.loss_and_gradient(&z, &data.y, &data.weights);
        assert!(grads[0].weights.column(2).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn no_hidden_layer_points_toward_newton_solution() {
        let data = dataset(600, 3, 4);
        let train = TrainSet::without_holdout(data.clone());
        let input = InputScaler::fit(&data.x).unwrap();
        let cfg = MlpConfig {
            hidden: vec![],
            validation_fraction: 0.0,
            epochs: 100,
            ..Default::default()
        };
        let net = fit_mlp(&train, &cfg, Some(input.clone()), 9).unwrap();
        let lr = fit_logistic(&train, &LogisticConfig::default()).unwrap();
        // Newton coefficients expressed on the standardized inputs.
        let newton: Vec<f64> = lr.coefficients.iter().zip(&input.scaler.std).map(|(b, s)| b * s).collect();
        let w = net.layers[0].weights.row(0).to_vec();
        let dot: f64 = w.iter().zip(&newton).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (norm(&w) * norm(&newton)) > 0.99);
    }

    #[test]
    fn learns_and_outputs_probabilities() {
        let data = dataset(400, 4, 6);
        let train = TrainSet::without_holdout(data.clone());
        let input = InputScaler::fit(&data.x).unwrap();
        let cfg = MlpConfig {
            hidden: vec![8],
            epochs: 60,
            ..Default::default()
        };
        let net = fit_mlp(&train, &cfg, Some(input), 2).unwrap();
        let p = net.predict_proba(&data.x).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(roc_auc_score(&data.y, &p).unwrap() > 0.75);
        assert!(net.trace.best_epoch >= 1);
    }
}
