//! Feature combinations shared by the detector modules.

use serde::{Deserialize, Serialize};

use crate::domain::Embedding;
use crate::error::{Error, Result};

/// Cosine of the angle between two embeddings, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    a.check_compatible(b)?;
    cosine(&a.to_f64(), &b.to_f64())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Signed difference `a - b`.
pub fn difference(a: &Embedding, b: &Embedding) -> Result<Vec<f64>> {
    a.check_compatible(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| x as f64 - y as f64)
        .collect())
}

/// `a - b` rescaled with the vector's own min and max so its components span
/// `[0, 1]`. A constant difference maps to all zeros.
pub fn diff_minmax(a: &Embedding, b: &Embedding) -> Result<Vec<f64>> {
    Ok(minmax_normalize(&difference(a, b)?))
}

pub fn minmax_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&x| ((x - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Lengths of the identity-difference and artifact blocks of the combined
/// feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub identity_dim: usize,
    pub artifact_dim: usize,
}

impl FeatureLayout {
    pub fn new(identity_dim: usize, artifact_dim: usize) -> Self {
        Self {
            identity_dim,
            artifact_dim,
        }
    }

    /// `identity_dim + 1 + artifact_dim`; 1025 for the 512/512 layout.
    pub fn len(&self) -> usize {
        self.identity_dim + 1 + self.artifact_dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cosine_offset(&self) -> usize {
        self.identity_dim
    }

    pub fn artifact_offset(&self) -> usize {
        self.identity_dim + 1
    }
}

/// The three IdA inputs kept apart; `concat` lays them out as
/// `[diff | cosine | artifact]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFeatures {
    pub diff: Vec<f64>,
    pub cosine: f64,
    pub artifact: Vec<f64>,
}

impl CombinedFeatures {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.diff.len(), self.artifact.len())
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().len());
        v.extend_from_slice(&self.diff);
        v.push(self.cosine);
        v.extend_from_slice(&self.artifact);
        v
    }

    pub fn split(v: &[f64], layout: FeatureLayout) -> Result<Self> {
        if v.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: v.len(),
            });
        }
        Ok(Self {
            diff: v[..layout.identity_dim].to_vec(),
            cosine: v[layout.cosine_offset()],
            artifact: v[layout.artifact_offset()..].to_vec(),
        })
    }
}

pub fn concat_features(
    diff: &[f64],
    cosine: f64,
    artifact: &[f64],
    layout: FeatureLayout,
) -> Result<Vec<f64>> {
    if diff.len() != layout.identity_dim {
        return Err(Error::DimensionMismatch {
            expected: layout.identity_dim,
            actual: diff.len(),
        });
    }
    if artifact.len() != layout.artifact_dim {
        return Err(Error::DimensionMismatch {
            expected: layout.artifact_dim,
            actual: artifact.len(),
        });
    }
    Ok(CombinedFeatures {
        diff: diff.to_vec(),
        cosine,
        artifact: artifact.to_vec(),
    }
    .concat())
}
