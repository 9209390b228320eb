use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Adaptive moment estimation with bias correction.
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    /// Plain gradient descent.
    Sgd { learning_rate: f64 },
}

impl Optimizer {
    pub fn adam(learning_rate: f64) -> Self {
        Optimizer::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            Optimizer::Adam { learning_rate, .. } | Optimizer::Sgd { learning_rate } => learning_rate,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Fraction of samples held out (after a seeded shuffle) for validation.
    pub validation_fraction: f64,
    /// Reshuffle the training samples every epoch.
    pub shuffle: bool,
    /// Rows per gradient work unit. Batches are split into chunks of this
    /// size, evaluated in parallel, and summed in chunk order, so results do
    /// not depend on the number of worker threads.
    pub grad_chunk: usize,
    /// Multiply the learning rate by `lr_decay` after every epoch.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            optimizer: Optimizer::default(),
            seed: 0,
            validation_fraction: 0.0,
            shuffle: true,
            grad_chunk: 32,
            lr_decay: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = self.optimizer.learning_rate();
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.grad_chunk == 0 {
            return Err(Error::Config("gradient chunk must be at least 1".into()));
        }
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr decay must be in (0, 1], got {}", self.lr_decay)));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon, .. } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::Config("invalid Adam hyperparameters".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean squared error over the epoch's batches, measured before each update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

struct OptimizerState {
    optimizer: Optimizer,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    fn new(optimizer: Optimizer, model: &Model) -> Self {
        let zeros: Vec<Vec<f64>> = model.params().iter().map(|t| vec![0.0; t.len()]).collect();
        OptimizerState {
            optimizer,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn apply(&mut self, model: &mut Model, grads: &[Vec<f64>], lr_scale: f64) {
        self.step += 1;
        match self.optimizer {
            Optimizer::Sgd { learning_rate } => {
                let lr = learning_rate * lr_scale;
                for (p, g) in model.params_mut().into_iter().zip(grads) {
                    for (p, g) in p.iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            Optimizer::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                let lr = learning_rate * lr_scale;
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let tensors = model.params_mut().into_iter().zip(grads);
                for ((p, g), (m, v)) in tensors.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

/// Gradient of the batch mean squared error, plus the batch sum of squared errors.
pub(crate) fn batch_gradient(
    model: &Model,
    inputs: ArrayView2<'_, f64>,
    labels: ArrayView1<'_, f64>,
    chunk: usize,
) -> (f64, Vec<Vec<f64>>) {
    let n = inputs.nrows();
    let scale = 1.0 / n as f64;
    let parts: Vec<(f64, Vec<Vec<f64>>)> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n);
            let x = inputs.slice(ndarray::s![lo..hi, ..]);
            let y = labels.slice(ndarray::s![lo..hi]).to_vec();
            model.squared_error_grads(x, &y, scale)
        })
        .collect();
    let mut parts = parts.into_iter();
    let (mut sse, mut grads) = parts.next().expect("non-empty batch");
    for (s, g) in parts {
        sse += s;
        for (acc, t) in grads.iter_mut().zip(g) {
            for (a, v) in acc.iter_mut().zip(t) {
                *a += v;
            }
        }
    }
    (sse, grads)
}

/// Mean squared error of the model on a labelled set.
pub fn evaluate_mse(model: &Model, inputs: ArrayView2<'_, f64>, labels: ArrayView1<'_, f64>) -> Result<f64> {
    let preds = model.predict(inputs)?;
    let n = labels.len().max(1) as f64;
    Ok(preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n)
}

/// Minimizes mean squared error by mini-batch gradient descent.
///
/// `inputs` holds one sample per row. With a fixed seed and `grad_chunk`
/// the result is reproducible bit for bit on one platform.
pub fn train(
    mut model: Model,
    inputs: ArrayView2<'_, f64>,
    labels: ArrayView1<'_, f64>,
    config: &TrainConfig,
) -> Result<(Model, History)> {
    config.validate()?;
    if inputs.ncols() != model.input_len() {
        return Err(Error::ShapeMismatch {
            expected: model.input_len(),
            got: inputs.ncols(),
        });
    }
    if inputs.nrows() != labels.len() {
        return Err(Error::Config(format!(
            "{} inputs but {} labels",
            inputs.nrows(),
            labels.len()
        )));
    }
    if inputs.nrows() == 0 {
        return Err(Error::Config("training set is empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    let n_val = (config.validation_fraction * inputs.nrows() as f64).round() as usize;
    if n_val > 0 {
        order.shuffle(&mut rng);
    }
    if n_val >= order.len() {
        return Err(Error::Config("validation split leaves no training samples".into()));
    }
    let val_idx = order.split_off(order.len() - n_val);
    let mut train_idx = order;
    let val = (!val_idx.is_empty()).then(|| {
        (
            inputs.select(Axis(0), &val_idx),
            labels.select(Axis(0), &val_idx),
        )
    });

    let mut state = OptimizerState::new(config.optimizer, &model);
    let mut history = History::default();
    let mut lr_scale = 1.0;
    for epoch in 0..config.epochs {
        if config.shuffle {
            train_idx.shuffle(&mut rng);
        }
        let mut sse = 0.0;
        for (batch, idx) in train_idx.chunks(config.batch_size).enumerate() {
            let x = inputs.select(Axis(0), idx);
            let y = labels.select(Axis(0), idx);
            let (batch_sse, grads) = batch_gradient(&model, x.view(), y.view(), config.grad_chunk);
            if !batch_sse.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            sse += batch_sse;
            state.apply(&mut model, &grads, lr_scale);
        }
        let train_loss = sse / train_idx.len() as f64;
        let val_loss = match &val {
            Some((vx, vy)) => Some(evaluate_mse(&model, vx.view(), vy.view())?),
            None => None,
        };
        if let Some(v) = val_loss.filter(|v| !v.is_finite()) {
            return Err(Error::Training(format!("validation loss became {v} at epoch {epoch}")));
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        lr_scale *= config.lr_decay;
    }
    if !model.all_finite() {
        return Err(Error::Training("parameters became non-finite".into()));
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_mlp, LayerSpec, Shape};
    use ndarray::{Array1, Array2};

    fn toy(n: usize) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 3 + j) as f64 * 0.731).sin());
        let y = x.map_axis(Axis(1), |r| 0.5 * r[0] - 1.5 * r[1] + 0.25 * r[2] + 0.1);
        (x, y)
    }

    #[test]
    fn memorizes_tiny_dataset() {
        let (x, y) = toy(10);
        let model = build_mlp(3, &[16, 8], 2).unwrap();
        let cfg = TrainConfig {
            epochs: 2000,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let (model, history) = train(model, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(history.len(), 2000);
        let mse = evaluate_mse(&model, x.view(), y.view()).unwrap();
        assert!(mse < 1e-4, "mse {mse}");
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let (x, y) = toy(20);
        let model = build_mlp(3, &[4], 5).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 20,
            optimizer: Optimizer::adam(0.0),
            shuffle: false,
            ..TrainConfig::default()
        };
        let (trained, history) = train(model.clone(), x.view(), y.view(), &cfg).unwrap();
        assert_eq!(trained, model);
        let first = history.epochs[0].train_loss;
        assert!(history.epochs.iter().all(|e| e.train_loss == first));
    }

    #[test]
    fn full_batch_linear_least_squares_loss_is_non_increasing() {
        let (x, y) = toy(40);
        let model = Model::from_specs(Shape::Flat(3), &[LayerSpec::Dense { units: 1 }], 1).unwrap();
        for optimizer in [Optimizer::Sgd { learning_rate: 0.05 }, Optimizer::adam(1e-3)] {
            let cfg = TrainConfig {
                epochs: 300,
                batch_size: 40,
                optimizer,
                shuffle: false,
                ..TrainConfig::default()
            };
            let (_, history) = train(model.clone(), x.view(), y.view(), &cfg).unwrap();
            for w in history.epochs.windows(2) {
                assert!(
                    w[1].train_loss <= w[0].train_loss + 1e-12,
                    "{optimizer:?}: epoch {} loss rose {} -> {}",
                    w[1].epoch,
                    w[0].train_loss,
                    w[1].train_loss
                );
            }
        }
    }

    #[test]
    fn full_batch_result_ignores_sample_order() {
        let (x, y) = toy(30);
        let perm: Vec<usize> = (0..30).map(|i| (i * 7) % 30).collect();
        let xp = x.select(Axis(0), &perm);
        let yp = y.select(Axis(0), &perm);
        let model = build_mlp(3, &[6, 4], 8).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 30,
            shuffle: false,
            ..TrainConfig::default()
        };
        let (a, _) = train(model.clone(), x.view(), y.view(), &cfg).unwrap();
        let (b, _) = train(model, xp.view(), yp.view(), &cfg).unwrap();
        for (ta, tb) in a.params().iter().zip(b.params()) {
            for (u, v) in ta.iter().zip(tb.iter()) {
                assert!((u - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn seeded_training_is_bitwise_reproducible() {
        let (x, y) = toy(50);
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 8,
            validation_fraction: 0.2,
            ..TrainConfig::default()
        };
        let run = || train(build_mlp(3, &[8], 1).unwrap(), x.view(), y.view(), &cfg).unwrap();
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert!(ha.epochs.iter().all(|e| e.val_loss.is_some()));
    }

    #[test]
    fn nan_labels_report_epoch_and_batch() {
        let (x, mut y) = toy(16);
        y[9] = f64::NAN;
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            shuffle: false,
            ..TrainConfig::default()
        };
        let err = train(build_mlp(3, &[4], 0).unwrap(), x.view(), y.view(), &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, batch: 1 }), "{err}");
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { optimizer: Optimizer::adam(-1.0), ..TrainConfig::default() },
            TrainConfig { optimizer: Optimizer::adam(f64::NAN), ..TrainConfig::default() },
            TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
