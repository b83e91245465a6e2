//! Document-only artifact features.
//!
//! Three extractors share one interface: a passthrough for synthetic
//! artifact vectors, a small trainable convolutional network for tiny image
//! crops, and an adapter that serves features precomputed offline by a
//! pretrained image network.

use std::sync::Arc;

use image::imageops::{self, FilterType};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{EarlyStopping, EpochRecord, TrainingLog};
use crate::embeddings::{EmbeddingCache, FaceCrop};
use crate::error::{Error, Result};

/// What an extractor is fed: a face crop or an already-computed vector.
#[derive(Debug, Clone, Copy)]
pub enum ArtifactInput<'a> {
    Image(&'a FaceCrop),
    Vector(&'a [f32]),
}

impl ArtifactInput<'_> {
    fn modality(&self) -> &'static str {
        match self {
            ArtifactInput::Image(_) => "image",
            ArtifactInput::Vector(_) => "vector",
        }
    }
}

pub trait ArtifactExtractor: Send + Sync {
    fn extractor_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn is_trainable(&self) -> bool;
    fn extract(&self, input: ArtifactInput<'_>) -> Result<Vec<f64>>;
}

fn modality_error(id: &str, expected: &str, got: &ArtifactInput<'_>) -> Error {
    Error::Modality(format!(
        "artifact extractor `{id}` expects {expected} input, got {}",
        got.modality()
    ))
}

/// Returns synthetic artifact vectors unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassthroughExtractor {
    pub dimension: usize,
}

impl ArtifactExtractor for PassthroughExtractor {
    fn extractor_id(&self) -> &str {
        "passthrough"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn is_trainable(&self) -> bool {
        false
    }

    fn extract(&self, input: ArtifactInput<'_>) -> Result<Vec<f64>> {
        match input {
            ArtifactInput::Vector(v) => {
                if v.len() != self.dimension {
                    return Err(Error::DimensionMismatch {
                        expected: self.dimension,
                        actual: v.len(),
                    });
                }
                Ok(v.iter().map(|&x| f64::from(x)).collect())
            }
            other => Err(modality_error(self.extractor_id(), "vector", &other)),
        }
    }
}

/// Serves features that a pretrained image network produced offline,
/// looked up by the crop's source reference.
#[derive(Debug, Clone)]
pub struct PrecomputedExtractor {
    pub id: String,
    pub dimension: usize,
    pub store: Arc<EmbeddingCache>,
}

impl ArtifactExtractor for PrecomputedExtractor {
    fn extractor_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn is_trainable(&self) -> bool {
        false
    }

    fn extract(&self, input: ArtifactInput<'_>) -> Result<Vec<f64>> {
        let ArtifactInput::Image(crop) = input else {
            return Err(modality_error(&self.id, "image", &input));
        };
        let v = self.store.get(&self.id, &crop.source_ref).ok_or_else(|| {
            Error::Provider {
                provider: self.id.clone(),
                reason: format!("no precomputed features for {}", crop.source_ref),
            }
        })?;
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: v.len(),
            });
        }
        Ok(v.iter().map(|&x| f64::from(x)).collect())
    }
}

/// Side length crops are resized to before the convolution.
pub const CONV_INPUT: usize = 32;
const CHANNELS: usize = 3;
const KERNEL: usize = 3;
const FILTERS: usize = 8;
const CONV_OUT: usize = CONV_INPUT - KERNEL + 1;
const POOLED: usize = FILTERS * 4;

/// Tiny image network: one 3x3 convolution with 8 filters, ReLU, mean pooling
/// over the four quadrants, then a linear projection to the feature width.
/// A logistic head on top of the features supplies the training signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNet {
    pub dimension: usize,
    /// `[filter][channel][row][col]`.
    pub kernels: Vec<f64>,
    pub conv_bias: Vec<f64>,
    /// `dimension x POOLED`, row-major.
    pub projection: Vec<f64>,
    pub projection_bias: Vec<f64>,
    pub head: Vec<f64>,
    pub head_bias: f64,
}

/// Intermediate values kept for back-propagation.
struct Trace {
    pre: Vec<f64>,
    pooled: Vec<f64>,
    features: Vec<f64>,
    logit: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct ConvGrad {
    kernels: Vec<f64>,
    conv_bias: Vec<f64>,
    projection: Vec<f64>,
    projection_bias: Vec<f64>,
    head: Vec<f64>,
    head_bias: f64,
}

impl ConvGrad {
    fn zeros(net: &ConvNet) -> Self {
        Self {
            kernels: vec![0.0; net.kernels.len()],
            conv_bias: vec![0.0; net.conv_bias.len()],
            projection: vec![0.0; net.projection.len()],
            projection_bias: vec![0.0; net.projection_bias.len()],
            head: vec![0.0; net.head.len()],
            head_bias: 0.0,
        }
    }
}

fn quadrant(i: usize, j: usize) -> usize {
    let half = CONV_OUT / 2;
    usize::from(i >= half) * 2 + usize::from(j >= half)
}

fn quadrant_size(q: usize) -> f64 {
    let half = CONV_OUT / 2;
    let rows = if q < 2 { half } else { CONV_OUT - half };
    let cols = if q % 2 == 0 { half } else { CONV_OUT - half };
    (rows * cols) as f64
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Resizes a crop to the network input and maps pixels to `[-0.5, 0.5]`,
/// laid out `[channel][row][col]`.
pub fn preprocess(crop: &FaceCrop) -> Vec<f64> {
    let small = imageops::resize(
        &crop.pixels,
        CONV_INPUT as u32,
        CONV_INPUT as u32,
        FilterType::Triangle,
    );
    let mut out = vec![0.0; CHANNELS * CONV_INPUT * CONV_INPUT];
    for (x, y, px) in small.enumerate_pixels() {
        for c in 0..CHANNELS {
            out[(c * CONV_INPUT + y as usize) * CONV_INPUT + x as usize] = f64::from(px[c]) / 255.0 - 0.5;
        }
    }
    out
}

impl ConvNet {
    pub fn new(dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let b = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-b..b)).collect()
        };
        let fan_conv = CHANNELS * KERNEL * KERNEL;
        Self {
            dimension,
            kernels: uniform(FILTERS * fan_conv, fan_conv),
            conv_bias: uniform(FILTERS, fan_conv),
            projection: uniform(dimension * POOLED, POOLED),
            projection_bias: uniform(dimension, POOLED),
            head: uniform(dimension, dimension),
            head_bias: 0.0,
        }
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut pre = vec![0.0; FILTERS * CONV_OUT * CONV_OUT];
        let mut pooled = vec![0.0; POOLED];
        for f in 0..FILTERS {
            for i in 0..CONV_OUT {
                for j in 0..CONV_OUT {
                    let mut z = self.conv_bias[f];
                    for c in 0..CHANNELS {
                        for ky in 0..KERNEL {
                            let row = (c * CONV_INPUT + i + ky) * CONV_INPUT + j;
                            let k = ((f * CHANNELS + c) * KERNEL + ky) * KERNEL;
                            for kx in 0..KERNEL {
                                z += self.kernels[k + kx] * x[row + kx];
                            }
                        }
                    }
                    pre[(f * CONV_OUT + i) * CONV_OUT + j] = z;
                    pooled[f * 4 + quadrant(i, j)] += z.max(0.0);
                }
            }
        }
        for (k, p) in pooled.iter_mut().enumerate() {
            *p /= quadrant_size(k % 4);
        }
        let features: Vec<f64> = (0..self.dimension)
            .map(|o| {
                let w = &self.projection[o * POOLED..(o + 1) * POOLED];
                self.projection_bias[o] + w.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let logit = self.head_bias + self.head.iter().zip(&features).map(|(a, b)| a * b).sum::<f64>();
        Trace {
            pre,
            pooled,
            features,
            logit,
        }
    }

    /// Artifact features of a preprocessed image.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).features
    }

    /// Morph probability from the auxiliary head.
    pub fn morph_probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.trace(x).logit)
    }

    fn loss(&self, batch: &[(&[f64], f64)]) -> f64 {
        batch
            .iter()
            .map(|(x, y)| bce_with_logit(self.trace(x).logit, *y))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Mean loss over the batch and its gradient.
    fn loss_and_grad(&self, batch: &[(&[f64], f64)]) -> (f64, ConvGrad) {
        let n = batch.len() as f64;
        let mut g = ConvGrad::zeros(self);
        let mut loss = 0.0;
        for (x, y) in batch {
            let t = self.trace(x);
            loss += bce_with_logit(t.logit, *y);
            let dl = (sigmoid(t.logit) - y) / n;
            g.head_bias += dl;
            let mut d_pooled = vec![0.0; POOLED];
            for o in 0..self.dimension {
                g.head[o] += dl * t.features[o];
                let d_feat = dl * self.head[o];
                g.projection_bias[o] += d_feat;
                let w = &self.projection[o * POOLED..(o + 1) * POOLED];
                for k in 0..POOLED {
                    g.projection[o * POOLED + k] += d_feat * t.pooled[k];
                    d_pooled[k] += d_feat * w[k];
                }
            }
            for f in 0..FILTERS {
                for i in 0..CONV_OUT {
                    for j in 0..CONV_OUT {
                        if t.pre[(f * CONV_OUT + i) * CONV_OUT + j] <= 0.0 {
                            continue;
                        }
                        let q = quadrant(i, j);
                        let dz = d_pooled[f * 4 + q] / quadrant_size(q);
                        g.conv_bias[f] += dz;
                        for c in 0..CHANNELS {
                            for ky in 0..KERNEL {
                                let row = (c * CONV_INPUT + i + ky) * CONV_INPUT + j;
                                let k = ((f * CHANNELS + c) * KERNEL + ky) * KERNEL;
                                for kx in 0..KERNEL {
                                    g.kernels[k + kx] += dz * x[row + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        (loss / n, g)
    }

    fn sgd_step(&mut self, g: &ConvGrad, lr: f64) {
        let step = |w: &mut [f64], d: &[f64]| w.iter_mut().zip(d).for_each(|(w, d)| *w -= lr * d);
        step(&mut self.kernels, &g.kernels);
        step(&mut self.conv_bias, &g.conv_bias);
        step(&mut self.projection, &g.projection);
        step(&mut self.projection_bias, &g.projection_bias);
        step(&mut self.head, &g.head);
        self.head_bias -= lr * g.head_bias;
    }
}

impl ArtifactExtractor for ConvNet {
    fn extractor_id(&self) -> &str {
        "small-conv"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn is_trainable(&self) -> bool {
        true
    }

    fn extract(&self, input: ArtifactInput<'_>) -> Result<Vec<f64>> {
        match input {
            ArtifactInput::Image(crop) => Ok(self.features(&preprocess(crop))),
            other => Err(modality_error(self.extractor_id(), "image", &other)),
        }
    }
}

/// Plain SGD (no momentum) on the morph/bona fide objective of the auxiliary head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvTrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stopping: EarlyStopping,
}

impl Default for ConvTrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 100,
            early_stopping: EarlyStopping {
                patience: 5,
                min_delta: 1e-4,
            },
        }
    }
}

/// Trains a [`ConvNet`] on `(crop, is_morph)` examples. The network with the
/// lowest validation loss (training loss when no validation set is given) is returned.
pub fn train_conv(
    train: &[(&FaceCrop, bool)],
    validation: &[(&FaceCrop, bool)],
    dimension: usize,
    opts: &ConvTrainOptions,
    seed: u64,
) -> Result<(ConvNet, TrainingLog)> {
    let positives = train.iter().filter(|(_, m)| *m).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::TrainingData(
            "artifact extractor needs both morph and bona fide documents".into(),
        ));
    }
    let prep = |set: &[(&FaceCrop, bool)]| -> Vec<(Vec<f64>, f64)> {
        set.iter()
            .map(|(c, m)| (preprocess(c), f64::from(u8::from(*m))))
            .collect()
    };
    let train = prep(train);
    let validation = prep(validation);
    let val_batch: Vec<(&[f64], f64)> = validation.iter().map(|(x, y)| (x.as_slice(), *y)).collect();

    let mut net = ConvNet::new(dimension, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best = f64::INFINITY;
    let mut best_net = net.clone();
    let mut stale = 0;
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let batch: Vec<(&[f64], f64)> = chunk.iter().map(|&i| (train[i].0.as_slice(), train[i].1)).collect();
            let (loss, g) = net.loss_and_grad(&batch);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("artifact loss became {loss} in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            net.sgd_step(&g, opts.learning_rate);
        }
        let train_loss = total / train.len() as f64;
        let validation_loss = (!val_batch.is_empty()).then(|| net.loss(&val_batch));
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        });
        let monitored = validation_loss.unwrap_or(train_loss);
        if monitored < best - opts.early_stopping.min_delta {
            best = monitored;
            best_net = net.clone();
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.early_stopping.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best_net, log))
}

/// Serializable description of an extractor, stored in pipeline bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorSpec {
    Passthrough { dimension: usize },
    Precomputed { extractor_id: String, dimension: usize },
    Conv(ConvNet),
}

impl ExtractorSpec {
    pub fn dimension(&self) -> usize {
        match self {
            ExtractorSpec::Passthrough { dimension } | ExtractorSpec::Precomputed { dimension, .. } => *dimension,
            ExtractorSpec::Conv(net) => net.dimension,
        }
    }

    /// `store` backs the precomputed adapter; other kinds ignore it.
    pub fn build(&self, store: Arc<EmbeddingCache>) -> Arc<dyn ArtifactExtractor> {
        match self {
            ExtractorSpec::Passthrough { dimension } => Arc::new(PassthroughExtractor {
                dimension: *dimension,
            }),
            ExtractorSpec::Precomputed {
                extractor_id,
                dimension,
            } => Arc::new(PrecomputedExtractor {
                id: extractor_id.clone(),
                dimension: *dimension,
                store,
            }),
            ExtractorSpec::Conv(net) => Arc::new(net.clone()),
        }
    }
}
