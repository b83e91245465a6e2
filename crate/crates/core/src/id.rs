//! Identity detector: a calibrated RBF machine on the signed difference
//! `doc - live` of the two identity embeddings. Higher scores mean "more
//! likely morphed".

use serde::{Deserialize, Serialize};

use crate::domain::Embedding;
use crate::embeddings::difference;
use crate::error::{Error, Result};
use crate::svm::{balanced_weights, CalibratedSvm, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdParams {
    pub c: f64,
    pub gamma: f64,
    pub class_weighting: bool,
    /// Multiplier applied to the difference vector before the kernel.
    /// Unit-norm embeddings need a magnitude comparable to face-recognition
    /// features for `gamma` to act as a radial rather than linear kernel.
    pub input_scale: f64,
}

impl Default for IdParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1e-3,
            class_weighting: false,
            input_scale: 32.0,
        }
    }
}

impl IdParams {
    pub fn svm(&self) -> SvmParams {
        SvmParams {
            c: self.c,
            gamma: self.gamma,
            class_weighting: self.class_weighting,
            ..SvmParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdModel {
    pub dim: usize,
    pub params: IdParams,
    pub machine: CalibratedSvm,
}

/// One training example: document embedding, live embedding, morph flag.
pub type IdSample = (Embedding, Embedding, bool);

pub fn train_id(samples: &[IdSample], params: &IdParams, seed: u64) -> Result<IdModel> {
    let Some((first, _, _)) = samples.first() else {
        return Err(Error::TrainingData("identity detector has no training data".into()));
    };
    let n_morph = samples.iter().filter(|s| s.2).count();
    if n_morph == 0 || n_morph == samples.len() {
        return Err(Error::TrainingData(
            "identity detector needs both morph and bona fide examples".into(),
        ));
    }
    if !(params.input_scale > 0.0 && params.input_scale.is_finite()) {
        return Err(Error::Config(format!(
            "id.input_scale must be positive, got {}",
            params.input_scale
        )));
    }
    let dim = first.dim();
    let x = samples
        .iter()
        .map(|(doc, live, _)| {
            if doc.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: doc.dim() });
            }
            scaled_difference(doc, live, params.input_scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<bool> = samples.iter().map(|s| s.2).collect();
    let weights = params.class_weighting.then(|| {
        let classes: Vec<usize> = positive.iter().map(|&p| usize::from(p)).collect();
        balanced_weights(&classes, 2)
    });
    let machine = CalibratedSvm::train(&x, &positive, weights.as_deref(), &params.svm(), seed)?;
    Ok(IdModel {
        dim,
        params: *params,
        machine,
    })
}

fn scaled_difference(doc: &Embedding, live: &Embedding, scale: f64) -> Result<Vec<f64>> {
    let mut d = difference(doc, live)?;
    d.iter_mut().for_each(|v| *v *= scale);
    Ok(d)
}

impl IdModel {
    /// Morph probability for a raw `doc - live` difference vector.
    pub fn score_difference(&self, diff: &[f64]) -> Result<f64> {
        if diff.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: diff.len(),
            });
        }
        let x: Vec<f64> = diff.iter().map(|v| v * self.params.input_scale).collect();
        Ok(self.machine.probability(&x).clamp(0.0, 1.0))
    }
}

/// `S_Id`: morph probability of the pair.
pub fn score_id(model: &IdModel, doc: &Embedding, live: &Embedding) -> Result<f64> {
    if doc.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: doc.dim(),
        });
    }
    model.score_difference(&difference(doc, live)?)
}
