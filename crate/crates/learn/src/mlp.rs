//! Fully connected ReLU regressor trained with Adam on mean squared error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{check_finite, check_x, check_xy, mse, Standardizer};
use crate::error::{LearnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![64, 16],
            lr: 5e-5,
            epochs: 300,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Dense layer: `weights[o][i]`, one bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub standardizer: Standardizer,
    /// Epoch whose weights were kept (0 = initialization).
    pub best_epoch: usize,
}

impl MlpModel {
    /// He-normal weights and zero biases, drawn from `seed`.
    pub fn init(standardizer: Standardizer, hidden: &[usize], seed: u64) -> Self {
        let mut sizes = vec![standardizer.width()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let normal = Normal::new(0.0, (2.0 / p[0] as f64).sqrt()).unwrap();
                Layer {
                    weights: (0..p[1])
                        .map(|_| (0..p[0]).map(|_| normal.sample(&mut rng)).collect())
                        .collect(),
                    biases: vec![0.0; p[1]],
                }
            })
            .collect();
        MlpModel {
            sizes,
            layers,
            standardizer,
            best_epoch: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.sizes[0]
    }

    /// Activations of every layer for a standardized input; the last entry
    /// is the one-element output.
    fn forward(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![z.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let out = layer
                .weights
                .iter()
                .zip(&layer.biases)
                .map(|(w, b)| {
                    let s = w.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b;
                    if l < last {
                        s.max(0.0)
                    } else {
                        s
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn predict_std(&self, z: &[f64]) -> f64 {
        self.forward(z).last().unwrap()[0]
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_std(&self.standardizer.transform_row(x))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Mean squared error over standardized rows and its gradient, shaped
    /// like `layers`.
    pub fn loss_and_gradient(&self, z: &[Vec<f64>], y: &[f64]) -> (f64, Vec<Layer>) {
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: vec![vec![0.0; l.weights[0].len()]; l.weights.len()],
                biases: vec![0.0; l.biases.len()],
            })
            .collect();
        let n = z.len() as f64;
        let mut loss = 0.0;
        for (row, &target) in z.iter().zip(y) {
            let acts = self.forward(row);
            let err = acts.last().unwrap()[0] - target;
            loss += err * err / n;
            let mut delta = vec![2.0 * err / n];
            for l in (0..self.layers.len()).rev() {
                let input = &acts[l];
                for (o, d) in delta.iter().enumerate() {
                    grads[l].biases[o] += d;
                    for (g, x) in grads[l].weights[o].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
                if l > 0 {
                    delta = (0..input.len())
                        .map(|i| {
                            if input[i] <= 0.0 {
                                return 0.0;
                            }
                            delta
                                .iter()
                                .enumerate()
                                .map(|(o, d)| d * self.layers[l].weights[o][i])
                                .sum()
                        })
                        .collect();
                }
            }
        }
        (loss, grads)
    }

    /// All parameters in a fixed order: per layer, weights row by row, then biases.
    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let mut it = p.iter();
        for l in &mut self.layers {
            for row in &mut l.weights {
                row.iter_mut().for_each(|w| *w = *it.next().unwrap());
            }
            l.biases.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
    }
}

pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        for row in &l.weights {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&l.biases);
    }
    out
}

/// Mini-batch Adam. With a validation set the weights from the epoch with
/// the lowest validation MSE are returned; otherwise the final weights.
pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &MlpConfig,
    validation: Option<(&[Vec<f64>], &[f64])>,
) -> Result<MlpModel> {
    check_xy(x, y)?;
    check_finite(y)?;
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 || cfg.hidden.contains(&0) {
        return Err(LearnError::Range(format!(
            "lr {} / batch {} / hidden {:?}",
            cfg.lr, cfg.batch_size, cfg.hidden
        )));
    }
    if let Some((vx, vy)) = validation {
        check_xy(vx, vy)?;
        check_finite(vy)?;
        if check_x(vx)? != x[0].len() {
            return Err(LearnError::Shape("validation width differs".into()));
        }
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform(x);
    let mut model = MlpModel::init(standardizer, &cfg.hidden, cfg.seed);
    let val_score = |m: &MlpModel| validation.map(|(vx, vy)| mse(&m.predict(vx), vy));
    let mut best = (val_score(&model).unwrap_or(f64::INFINITY), model.clone());

    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let n_params = model.parameters().len();
    let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let bz: Vec<Vec<f64>> = batch.iter().map(|&i| z[i].clone()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grads) = model.loss_and_gradient(&bz, &by);
            if !loss.is_finite() {
                return Err(LearnError::Divergence(epoch));
            }
            let g = flatten(&grads);
            let mut p = model.parameters();
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for t in 0..n_params {
                m[t] = b1 * m[t] + (1.0 - b1) * g[t];
                v[t] = b2 * v[t] + (1.0 - b2) * g[t] * g[t];
                p[t] -= cfg.lr * (m[t] / c1) / ((v[t] / c2).sqrt() + eps);
            }
            model.set_parameters(&p);
        }
        if let Some(score) = val_score(&model) {
            if !score.is_finite() {
                return Err(LearnError::Divergence(epoch));
            }
            if score < best.0 {
                model.best_epoch = epoch;
                best = (score, model.clone());
            }
        }
    }
    if validation.is_some() {
        Ok(best.1)
    } else {
        model.best_epoch = cfg.epochs;
        Ok(model)
    }
}
