use std::sync::Arc;

use image::imageops::{self, FilterType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cache::EmbeddingCache;
use super::crop::FaceCrop;
use crate::error::{Error, Result};

/// What a provider is asked to embed.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    Crop(&'a FaceCrop),
    /// Key of a precomputed vector.
    Stored(&'a str),
}

/// Contract for face-recognition backbones and their stand-ins.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn is_deterministic(&self) -> bool {
        true
    }
    fn embed(&self, source: EmbeddingSource<'_>) -> Result<Vec<f32>>;
}

/// Serves precomputed vectors (e.g. from the synthetic benchmark) verbatim.
pub struct StoredProvider {
    id: String,
    dimension: usize,
    store: Arc<EmbeddingCache>,
}

impl StoredProvider {
    pub fn new(id: impl Into<String>, dimension: usize, store: Arc<EmbeddingCache>) -> Self {
        Self {
            id: id.into(),
            dimension,
            store,
        }
    }
}

impl EmbeddingProvider for StoredProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, source: EmbeddingSource<'_>) -> Result<Vec<f32>> {
        match source {
            EmbeddingSource::Stored(key) => {
                self.store.get(&self.id, key).ok_or_else(|| Error::Provider {
                    provider: self.id.clone(),
                    reason: format!("no stored vector for `{key}`"),
                })
            }
            EmbeddingSource::Crop(c) => Err(Error::Modality(format!(
                "provider `{}` serves stored vectors, got image `{}`",
                self.id, c.source_ref
            ))),
        }
    }
}

/// Deterministic image embedder for desk-scale image runs: the crop is
/// resized to a small grayscale grid, centred, projected with a seeded
/// Gaussian matrix and L2-normalized.
pub struct PixelProjectionProvider {
    dimension: usize,
    side: u32,
    projection: Vec<f64>,
}

impl PixelProjectionProvider {
    pub const ID: &'static str = "pixel-projection";

    pub fn new(dimension: usize, seed: u64) -> Self {
        let side = 16u32;
        let inputs = (side * side) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..dimension * inputs)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self {
            dimension,
            side,
            projection,
        }
    }
}

impl EmbeddingProvider for PixelProjectionProvider {
    fn provider_id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, source: EmbeddingSource<'_>) -> Result<Vec<f32>> {
        let crop = match source {
            EmbeddingSource::Crop(c) => c,
            EmbeddingSource::Stored(key) => {
                return Err(Error::Modality(format!(
                    "`{}` embeds images, got stored key `{key}`",
                    Self::ID
                )))
            }
        };
        let gray = imageops::grayscale(&crop.pixels);
        let small = imageops::resize(&gray, self.side, self.side, FilterType::Triangle);
        let mut px: Vec<f64> = small.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        let mean = px.iter().sum::<f64>() / px.len() as f64;
        px.iter_mut().for_each(|v| *v -= mean);

        let inputs = px.len();
        let mut out: Vec<f64> = self
            .projection
            .chunks_exact(inputs)
            .map(|row| row.iter().zip(&px).map(|(w, x)| w * x).sum())
            .collect();
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Provider {
                provider: Self::ID.into(),
                reason: format!("flat image `{}` has no embedding", crop.source_ref),
            });
        }
        out.iter_mut().for_each(|v| *v /= norm);
        Ok(out.into_iter().map(|v| v as f32).collect())
    }
}

/// Provider selection as stored in configs and bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    /// `synthetic` (stored vectors) or `pixel-projection`.
    pub id: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self {
            id: crate::synth::SYNTHETIC_PROVIDER.to_string(),
            dimension: 64,
            seed: 0,
        }
    }
}

impl ProviderSpec {
    /// Instantiates the provider. Stored-vector providers read from `store`.
    pub fn build(&self, store: Arc<EmbeddingCache>) -> Result<Arc<dyn EmbeddingProvider>> {
        match self.id.as_str() {
            PixelProjectionProvider::ID => {
                Ok(Arc::new(PixelProjectionProvider::new(self.dimension, self.seed)))
            }
            id if id == crate::synth::SYNTHETIC_PROVIDER => {
                Ok(Arc::new(StoredProvider::new(id, self.dimension, store)))
            }
            other => Err(Error::Config(format!("unknown embedding provider `{other}`"))),
        }
    }
}
