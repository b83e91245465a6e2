//! Face crops, embedding providers, the embedding cache and the feature
//! combinations used by the detector modules.

pub mod cache;
pub mod crop;
pub mod features;
pub mod provider;

pub use cache::EmbeddingCache;
pub use crop::{crop_face, load_image, CropStage, Detection, FaceCrop, FaceDetector};
pub use features::{
    concat_features, cosine, cosine_similarity, diff_minmax, difference, minmax_normalize,
    CombinedFeatures, FeatureLayout,
};
pub use provider::{
    EmbeddingProvider, EmbeddingSource, PixelProjectionProvider, ProviderSpec, StoredProvider,
};

use crate::domain::{Embedding, SourceRef};
use crate::error::{Error, Result};

/// Returns the embedding of `source`, consulting `cache` first.
///
/// `crop_loader` is only invoked for image references that miss the cache.
pub fn get_embedding(
    provider: &dyn EmbeddingProvider,
    source: &SourceRef,
    cache: &EmbeddingCache,
    expected_dim: usize,
    crop_loader: impl FnOnce(&str) -> Result<FaceCrop>,
) -> Result<Embedding> {
    let id = provider.provider_id();
    let key = source.key();
    let values = match cache.get(id, &key) {
        Some(v) => v,
        None => {
            let v = match source {
                SourceRef::Embedding(_) => provider.embed(EmbeddingSource::Stored(&key))?,
                SourceRef::Image(path) => {
                    let crop = crop_loader(path)?;
                    provider.embed(EmbeddingSource::Crop(&crop))?
                }
            };
            if v.len() != expected_dim {
                return Err(Error::DimensionMismatch {
                    expected: expected_dim,
                    actual: v.len(),
                });
            }
            if provider.is_deterministic() {
                cache.insert(id, &key, &v);
            }
            v
        }
    };
    if values.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            actual: values.len(),
        });
    }
    Embedding::new(values, id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        calls: AtomicUsize,
        dim: usize,
    }

    impl EmbeddingProvider for Counting {
        fn provider_id(&self) -> &str {
            "counting"
        }
        fn dimension(&self) -> usize {
            self.dim
        }
        fn embed(&self, _source: EmbeddingSource<'_>) -> Result<Vec<f32>> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(vec![0.1 + n as f32; self.dim])
        }
    }

    fn no_crop(_: &str) -> Result<FaceCrop> {
        unreachable!("stored refs never load crops")
    }

    #[test]
    fn second_call_hits_cache() {
        let p = Counting {
            calls: AtomicUsize::new(0),
            dim: 3,
        };
        let cache = EmbeddingCache::in_memory();
        let r = SourceRef::Embedding("a".into());
        let first = get_embedding(&p, &r, &cache, 3, no_crop).unwrap();
        let second = get_embedding(&p, &r, &cache, 3, no_crop).unwrap();
        assert_eq!(first, second);
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let p = Counting {
            calls: AtomicUsize::new(0),
            dim: 5,
        };
        let cache = EmbeddingCache::in_memory();
        let r = SourceRef::Embedding("a".into());
        assert!(matches!(
            get_embedding(&p, &r, &cache, 3, no_crop),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn synthetic_ref_returns_stored_vector() {
        let store = std::sync::Arc::new(EmbeddingCache::in_memory());
        store.insert("synthetic", "emb:doc/1", &[0.6, 0.8]);
        let p = StoredProvider::new("synthetic", 2, store);
        let cache = EmbeddingCache::in_memory();
        let e = get_embedding(&p, &SourceRef::Embedding("doc/1".into()), &cache, 2, no_crop)
            .unwrap();
        assert_eq!(e.values, vec![0.6, 0.8]);
        assert_eq!(e.provider_id, "synthetic");
    }
}
