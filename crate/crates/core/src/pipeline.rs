//! End-to-end pipeline: featurization of attempt pairs, training of every
//! module, and per-pair scoring.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ac::{train_ac, AcInput, AcModel, AcSample, AttemptProbabilities};
use crate::config::RunConfig;
use crate::domain::{AttemptLabel, AttemptPair, Embedding, SourceRef, ValidatedManifest};
use crate::embeddings::{
    cosine_similarity, crop_face, difference, get_embedding, load_image, CropStage,
    EmbeddingCache, EmbeddingProvider, FaceCrop, FeatureLayout, ProviderSpec,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionConfig, MADResult, ModuleScores};
use crate::id::{score_id, train_id, IdModel, IdSample};
use crate::ida::{
    ida_features, score_ida, train_artifact_head, train_conv, train_ida, ArtifactExtractor,
    ArtifactHead, ArtifactInput, ExtractorKind, ExtractorSpec, IdAModel,
};
use crate::synth::sub_seed;

/// Where pair inputs come from.
pub struct DataSources {
    /// Precomputed vectors: stored embeddings, artifact vectors, pretrained features.
    pub store: Arc<EmbeddingCache>,
    /// Cache consulted before asking the provider.
    pub cache: Arc<EmbeddingCache>,
    pub crop_stage: CropStage,
    pub image_root: Option<PathBuf>,
    /// Provider id under which document artifact vectors are stored.
    pub artifact_channel: String,
}

impl DataSources {
    /// Sources backed by one store that doubles as the cache.
    pub fn from_store(store: Arc<EmbeddingCache>) -> Self {
        Self {
            cache: Arc::clone(&store),
            store,
            crop_stage: CropStage::Passthrough,
            image_root: None,
            artifact_channel: crate::synth::SYNTHETIC_ARTIFACT.to_string(),
        }
    }

    fn crop(&self, path: &str) -> Result<FaceCrop> {
        let full = match &self.image_root {
            Some(root) => root.join(path),
            None => PathBuf::from(path),
        };
        let image = load_image(&full)?;
        crop_face(&self.crop_stage, image, path)
    }
}

/// Everything the detectors need for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInputs {
    pub doc: Embedding,
    pub live: Embedding,
    pub cosine: f64,
    pub artifact: Vec<f64>,
}

struct Featurizer<'a> {
    provider: &'a dyn EmbeddingProvider,
    extractor: &'a dyn ArtifactExtractor,
    sources: &'a DataSources,
    dim: usize,
}

impl Featurizer<'_> {
    fn embedding(&self, r: &SourceRef) -> Result<Embedding> {
        get_embedding(self.provider, r, &self.sources.cache, self.dim, |p| self.sources.crop(p))
    }

    fn artifact(&self, doc: &SourceRef) -> Result<Vec<f64>> {
        match doc {
            SourceRef::Embedding(_) => {
                let key = doc.key();
                let v = self.sources.store.get(&self.sources.artifact_channel, &key).ok_or_else(|| {
                    Error::Unresolvable(format!("{key} (artifact channel `{}`)", self.sources.artifact_channel))
                })?;
                self.extractor.extract(ArtifactInput::Vector(&v))
            }
            SourceRef::Image(path) => {
                let crop = self.sources.crop(path)?;
                self.extractor.extract(ArtifactInput::Image(&crop))
            }
        }
    }

    fn inputs(&self, pair: &AttemptPair) -> Result<PairInputs> {
        let doc = self.embedding(&pair.document_ref)?;
        let live = self.embedding(&pair.live_ref)?;
        doc.check_compatible(&live)?;
        let cosine = cosine_similarity(&doc, &live)?;
        let artifact = self.artifact(&pair.document_ref)?;
        Ok(PairInputs {
            doc,
            live,
            cosine,
            artifact,
        })
    }
}

fn ac_sample(input: AcInput, p: &PairInputs) -> Result<AcSample> {
    Ok(AcSample {
        cosine: p.cosine,
        difference: match input {
            AcInput::Cosine => None,
            AcInput::CosineAndDifference => Some(difference(&p.doc, &p.live)?),
        },
    })
}

/// The trained, serializable part of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModels {
    pub seed: u64,
    pub config: RunConfig,
    pub provider: ProviderSpec,
    pub extractor: ExtractorSpec,
    pub ac: AcModel,
    pub id: IdModel,
    pub ida: IdAModel,
    pub artifact_head: Option<ArtifactHead>,
}

/// Scores and posteriors of one pair, before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub cosine: f64,
    pub probabilities: AttemptProbabilities,
    pub s_ida: f64,
    pub s_id: f64,
    pub s_artifact: Option<f64>,
}

/// Whether fusion uses the attempt classifier or ground-truth labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcMode {
    #[default]
    Predicted,
    Oracle,
}

pub struct Pipeline {
    pub models: PipelineModels,
    pub sources: DataSources,
    provider: Arc<dyn EmbeddingProvider>,
    extractor: Arc<dyn ArtifactExtractor>,
}

/// Identifier of a pair in reports: `document|live`.
pub fn pair_ref(pair: &AttemptPair) -> String {
    format!("{}|{}", pair.document_ref.key(), pair.live_ref.key())
}

fn featurize_all(f: &Featurizer<'_>, pairs: &[AttemptPair]) -> Result<Vec<PairInputs>> {
    pairs.par_iter().map(|p| f.inputs(p)).collect()
}

/// Trains the attempt classifier, both detectors, the artifact extractor
/// (when trainable) and the artifact-only head.
pub fn train_pipeline(
    config: &RunConfig,
    train: &ValidatedManifest,
    validation: &ValidatedManifest,
    sources: DataSources,
) -> Result<Pipeline> {
    config.validate()?;
    let seed = config.seed;
    let provider = config.provider.build(Arc::clone(&sources.store)).map_err(|e| e.in_module("provider"))?;

    let extractor_spec = match config.ida.extractor.kind {
        ExtractorKind::Passthrough => {
            let first = train
                .entries()
                .first()
                .ok_or_else(|| Error::TrainingData("training manifest is empty".into()))?;
            let key = first.document_ref.key();
            let v = sources.store.get(&sources.artifact_channel, &key).ok_or_else(|| {
                Error::Unresolvable(format!("{key} (artifact channel `{}`)", sources.artifact_channel))
            })?;
            ExtractorSpec::Passthrough { dimension: v.len() }
        }
        ExtractorKind::Precomputed => ExtractorSpec::Precomputed {
            extractor_id: config.ida.extractor.precomputed_id.clone(),
            dimension: config.ida.extractor.dimension,
        },
        ExtractorKind::Conv => {
            let crops = |m: &ValidatedManifest| -> Result<Vec<(FaceCrop, bool)>> {
                let mut docs = BTreeMap::new();
                for p in m.entries() {
                    if let SourceRef::Image(path) = &p.document_ref {
                        docs.entry(path.clone()).or_insert(p.label.is_morph());
                    } else {
                        return Err(Error::Modality(
                            "the conv artifact extractor needs image document references".into(),
                        ));
                    }
                }
                docs.into_iter().map(|(path, m)| Ok((sources.crop(&path)?, m))).collect()
            };
            let tr = crops(train)?;
            let va = crops(validation)?;
            let tr_refs: Vec<(&FaceCrop, bool)> = tr.iter().map(|(c, m)| (c, *m)).collect();
            let va_refs: Vec<(&FaceCrop, bool)> = va.iter().map(|(c, m)| (c, *m)).collect();
            let (net, _) = train_conv(
                &tr_refs,
                &va_refs,
                config.ida.extractor.dimension,
                &config.ida.extractor.conv,
                sub_seed(seed, 10),
            )
            .map_err(|e| e.in_module("artifact extractor"))?;
            ExtractorSpec::Conv(net)
        }
    };
    let extractor = extractor_spec.build(Arc::clone(&sources.store));

    let featurizer = Featurizer {
        provider: provider.as_ref(),
        extractor: extractor.as_ref(),
        sources: &sources,
        dim: config.provider.dimension,
    };
    let train_inputs = featurize_all(&featurizer, train.entries())?;
    let val_inputs = featurize_all(&featurizer, validation.entries())?;
    let labels = |m: &ValidatedManifest| -> Vec<AttemptLabel> { m.entries().iter().map(|p| p.label).collect() };
    let (train_labels, val_labels) = (labels(train), labels(validation));

    let ac_samples = train_inputs
        .iter()
        .zip(&train_labels)
        .map(|(p, l)| Ok((ac_sample(config.ac.input, p)?, *l)))
        .collect::<Result<Vec<_>>>()?;
    let ac = train_ac(&ac_samples, &config.ac, sub_seed(seed, 1)).map_err(|e| e.in_module("attempt classifier"))?;

    let id_samples: Vec<IdSample> = train_inputs
        .iter()
        .zip(&train_labels)
        .map(|(p, l)| (p.doc.clone(), p.live.clone(), l.is_morph()))
        .collect();
    let id = train_id(&id_samples, &config.id, sub_seed(seed, 2)).map_err(|e| e.in_module("identity detector"))?;

    let ida_set = |inputs: &[PairInputs], labels: &[AttemptLabel]| -> Result<Vec<(Vec<f64>, bool)>> {
        inputs
            .iter()
            .zip(labels)
            .map(|(p, l)| Ok((ida_features(&p.doc, &p.live, &p.artifact)?, l.is_morph())))
            .collect()
    };
    let layout = FeatureLayout::new(config.provider.dimension, extractor.dimension());
    let ida = train_ida(
        &ida_set(&train_inputs, &train_labels)?,
        &ida_set(&val_inputs, &val_labels)?,
        layout,
        extractor.extractor_id(),
        &config.ida,
        sub_seed(seed, 3),
    )
    .map_err(|e| e.in_module("identity-artifact detector"))?;

    // Each document once: morph documents appear in two attempts.
    let doc_set = |m: &ValidatedManifest, inputs: &[PairInputs]| -> Vec<(Vec<f64>, bool)> {
        let mut seen = BTreeMap::new();
        for (p, x) in m.entries().iter().zip(inputs) {
            seen.entry(p.document_ref.key())
                .or_insert_with(|| (x.artifact.clone(), p.label.is_morph()));
        }
        seen.into_values().collect()
    };
    let artifact_head = train_artifact_head(
        &doc_set(train, &train_inputs),
        &doc_set(validation, &val_inputs),
        &config.artifact_head,
        sub_seed(seed, 4),
    )
    .map_err(|e| e.in_module("artifact head"))?;

    let models = PipelineModels {
        seed,
        config: config.clone(),
        provider: config.provider.clone(),
        extractor: extractor_spec,
        ac,
        id,
        ida,
        artifact_head: Some(artifact_head),
    };
    Ok(Pipeline {
        models,
        sources,
        provider,
        extractor,
    })
}

impl Pipeline {
    /// Rebuilds a runnable pipeline from trained models.
    pub fn from_models(models: PipelineModels, sources: DataSources) -> Result<Self> {
        let provider = models.provider.build(Arc::clone(&sources.store))?;
        let extractor = models.extractor.build(Arc::clone(&sources.store));
        Ok(Self {
            models,
            sources,
            provider,
            extractor,
        })
    }

    pub fn fusion(&self) -> FusionConfig {
        self.models.config.fusion
    }

    fn featurizer(&self) -> Featurizer<'_> {
        Featurizer {
            provider: self.provider.as_ref(),
            extractor: self.extractor.as_ref(),
            sources: &self.sources,
            dim: self.models.provider.dimension,
        }
    }

    pub fn inputs(&self, pair: &AttemptPair) -> Result<PairInputs> {
        self.featurizer().inputs(pair)
    }

    /// Every module output for one pair; fusion is left to the caller.
    pub fn pair_scores(&self, pair: &AttemptPair) -> Result<PairScores> {
        let x = self.inputs(pair)?;
        let m = &self.models;
        let probabilities = m
            .ac
            .classify(&ac_sample(m.ac.input, &x)?)
            .map_err(|e| e.in_module("attempt classifier"))?;
        let s_id = score_id(&m.id, &x.doc, &x.live).map_err(|e| e.in_module("identity detector"))?;
        let s_ida = score_ida(&m.ida, &ida_features(&x.doc, &x.live, &x.artifact)?)
            .map_err(|e| e.in_module("identity-artifact detector"))?;
        let s_artifact = m
            .artifact_head
            .as_ref()
            .map(|h| h.score(&x.artifact))
            .transpose()
            .map_err(|e| e.in_module("artifact head"))?;
        Ok(PairScores {
            cosine: x.cosine,
            probabilities,
            s_ida,
            s_id,
            s_artifact,
        })
    }

    /// Scores one pair with the configured fusion.
    pub fn score_attempt(&self, pair: &AttemptPair) -> Result<MADResult> {
        self.score_attempt_with(pair, AcMode::Predicted)
    }

    /// As [`Pipeline::score_attempt`]; in oracle mode the attempt posterior is
    /// the one-hot ground-truth label.
    pub fn score_attempt_with(&self, pair: &AttemptPair, mode: AcMode) -> Result<MADResult> {
        let s = self.pair_scores(pair)?;
        let probabilities = match mode {
            AcMode::Predicted => s.probabilities,
            AcMode::Oracle => AttemptProbabilities::one_hot(pair.label),
        };
        let module_scores = ModuleScores::new(s.s_ida, s.s_id)?;
        let fusion = self.fusion();
        let fused_score = fuse(fusion.mode, fusion.bona_fide_route, &probabilities, &module_scores)?;
        Ok(MADResult {
            pair_ref: pair_ref(pair),
            probabilities,
            module_scores,
            fused_score,
            fusion_mode: fusion.mode,
            routing_variant: fusion.bona_fide_route,
            cosine: s.cosine,
        })
    }
}
