//! Feed-forward binary classifier: ReLU hidden layers and one sigmoid output,
//! trained with Adam on binary cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored scores are kept this far away from exact 0 and 1.
pub const OUTPUT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and bias.
    fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(outputs, |_| rng.random_range(-bound..bound));
        Self { weights, bias }
    }

    fn forward(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed without forming the probability.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], &mut rng))
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    /// Layer widths from input to output.
    pub fn architecture(&self) -> Vec<usize> {
        let mut v = vec![self.input_dim()];
        v.extend(self.layers.iter().map(|l| l.weights.nrows()));
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Pre-sigmoid outputs for a batch (`batch x input`).
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h.view());
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h.index_axis_move(Axis(1), 0)
    }

    /// Output probabilities, clamped to `[OUTPUT_MARGIN, 1 - OUTPUT_MARGIN]`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.logits(x)
            .mapv(|z| sigmoid(z).clamp(OUTPUT_MARGIN, 1.0 - OUTPUT_MARGIN))
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.predict(view)[0]
    }

    /// Mean binary cross-entropy over the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let z = self.logits(x);
        z.iter().zip(y).map(|(&z, &y)| bce_with_logit(z, y)).sum::<f64>() / y.len() as f64
    }

    /// Mean loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Gradients) {
        let n = y.len() as f64;
        let last = self.layers.len() - 1;
        // Layer inputs; activations[i] feeds layer i.
        let mut activations = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&activations[i].view());
            if i < last {
                activations.push(z.mapv(|v| v.max(0.0)));
            }
            pre.push(z);
        }
        let logits = pre[last].column(0).to_owned();
        let loss = logits.iter().zip(y).map(|(&z, &t)| bce_with_logit(z, t)).sum::<f64>() / n;

        let mut delta: Array2<f64> = Array2::from_shape_fn((y.len(), 1), |(i, _)| {
            (sigmoid(logits[i]) - y[i]) / n
        });
        let mut gw = Vec::with_capacity(self.layers.len());
        let mut gb = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            gw.push(delta.t().dot(&activations[i]));
            gb.push(delta.sum_axis(Axis(0)));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                back.zip_mut_with(&pre[i - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Gradients { weights: gw, bias: gb })
    }
}

/// Adam with the usual defaults for the moment decay rates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &Mlp, learning_rate: f64) -> Self {
        let zeros = Gradients {
            weights: model.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: model.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        };
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, model: &mut Mlp, g: &Gradients) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .and(&g.weights[i])
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut self.m.bias[i])
                .and(&mut self.v.bias[i])
                .and(&g.bias[i])
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Stop once the monitored loss has not improved by `min_delta` for `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping: EarlyStopping,
    pub seed: u64,
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

/// Mini-batch Adam training. The weights with the lowest monitored loss
/// (validation when given, training otherwise) are kept.
pub fn fit(
    model: &mut Mlp,
    train_x: &Array2<f64>,
    train_y: &[f64],
    validation: Option<(&Array2<f64>, &[f64])>,
    opts: &FitOptions,
) -> Result<TrainingLog> {
    let n = train_y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(model, opts.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainingLog::default();
    let mut best = f64::INFINITY;
    let mut best_model = model.clone();
    let mut since_improvement = 0;

    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size.max(1)) {
            let bx = train_x.select(Axis(0), batch);
            let by: Vec<f64> = batch.iter().map(|&i| train_y[i]).collect();
            let (loss, grads) = model.loss_and_gradients(bx.view(), &by);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss became {loss} in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            adam.update(model, &grads);
        }
        let train_loss = total / n as f64;
        let validation_loss = validation.map(|(vx, vy)| model.loss(vx.view(), vy));
        if let Some(v) = validation_loss.filter(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("validation loss became {v} in epoch {epoch}")));
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        });
        let monitored = validation_loss.unwrap_or(train_loss);
        if monitored < best - opts.early_stopping.min_delta {
            best = monitored;
            best_model = model.clone();
            log.best_epoch = epoch;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= opts.early_stopping.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    *model = best_model;
    Ok(log)
}
