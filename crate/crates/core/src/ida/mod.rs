//! Identity-and-artifact detector: a feed-forward network over the
//! concatenation of the min-max normalized identity difference, the cosine
//! similarity and a document-only artifact feature.

pub mod artifact;
pub mod mlp;

pub use artifact::{
    train_conv, ArtifactExtractor, ArtifactInput, ConvNet, ConvTrainOptions, ExtractorSpec,
    PassthroughExtractor, PrecomputedExtractor,
};
pub use mlp::{EarlyStopping, FitOptions, Mlp, TrainingLog};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::Embedding;
use crate::embeddings::{concat_features, cosine_similarity, diff_minmax, FeatureLayout};
use crate::error::{Error, Result};

/// Which artifact extractor the pipeline builds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    /// Synthetic artifact vectors used as-is.
    #[default]
    Passthrough,
    /// Small convolutional network trained on document crops.
    Conv,
    /// Features precomputed by a pretrained image network.
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    /// Provider id under which precomputed features are stored.
    pub precomputed_id: String,
    /// Output width of the conv and precomputed extractors.
    pub dimension: usize,
    pub conv: ConvTrainOptions,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            kind: ExtractorKind::Passthrough,
            precomputed_id: "pretrained-artifact".into(),
            dimension: 512,
            conv: ConvTrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdaParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub extractor: ExtractorConfig,
}

impl Default for IdaParams {
    fn default() -> Self {
        Self {
            hidden: vec![250, 125, 64],
            learning_rate: 1e-5,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            min_delta: 1e-4,
            extractor: ExtractorConfig::default(),
        }
    }
}

impl IdaParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("ida.hidden layer widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "ida.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("ida.batch_size and ida.max_epochs must be positive".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::Config("ida.min_delta must be non-negative".into()));
        }
        Ok(())
    }

    fn fit_options(&self, seed: u64) -> FitOptions {
        FitOptions {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            early_stopping: EarlyStopping {
                patience: self.patience,
                min_delta: self.min_delta,
            },
            seed,
        }
    }
}

/// Hex SHA-256 of the layer widths and activations, identifying the
/// network shape independently of its weights.
pub fn architecture_hash(widths: &[usize]) -> String {
    let desc = format!(
        "mlp:{}:relu-hidden:sigmoid-out",
        widths.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
    );
    let digest = Sha256::digest(desc.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdAModel {
    pub layout: FeatureLayout,
    pub head: Mlp,
    pub architecture_hash: String,
    /// Id of the artifact extractor the features were produced with.
    pub extractor_id: String,
    pub training_log: TrainingLog,
}

/// Builds the detector input `[diff_minmax(doc, live) | cos | artifact]`.
pub fn ida_features(doc: &Embedding, live: &Embedding, artifact: &[f64]) -> Result<Vec<f64>> {
    let diff = diff_minmax(doc, live)?;
    let cos = cosine_similarity(doc, live)?;
    let layout = FeatureLayout::new(diff.len(), artifact.len());
    concat_features(&diff, cos, artifact, layout)
}

fn check_set(set: &[(Vec<f64>, bool)], width: usize) -> Result<()> {
    for (x, _) in set {
        if x.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("identity-artifact feature vector".into()));
        }
    }
    Ok(())
}

/// Trains the head on feature vectors built by [`ida_features`]. Early
/// stopping monitors `validation` when it is non-empty.
pub fn train_ida(
    train: &[(Vec<f64>, bool)],
    validation: &[(Vec<f64>, bool)],
    layout: FeatureLayout,
    extractor_id: &str,
    params: &IdaParams,
    seed: u64,
) -> Result<IdAModel> {
    params.validate()?;
    let positives = train.iter().filter(|(_, m)| *m).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::TrainingData(
            "identity-artifact detector needs both morph and bona fide examples".into(),
        ));
    }
    check_set(train, layout.len())?;
    check_set(validation, layout.len())?;

    let matrix = |set: &[(Vec<f64>, bool)]| {
        let rows: Vec<Vec<f64>> = set.iter().map(|(x, _)| x.clone()).collect();
        let y: Vec<f64> = set.iter().map(|(_, m)| f64::from(u8::from(*m))).collect();
        (mlp::to_matrix(&rows), y)
    };
    let (tx, ty) = matrix(train);
    let (vx, vy) = matrix(validation);
    let mut head = Mlp::new(layout.len(), &params.hidden, seed);
    let val = (!validation.is_empty()).then_some((&vx, vy.as_slice()));
    let training_log = mlp::fit(&mut head, &tx, &ty, val, &params.fit_options(seed))?;
    log::info!(
        "identity-artifact head trained for {} epochs (best {})",
        training_log.epochs.len(),
        training_log.best_epoch
    );
    Ok(IdAModel {
        layout,
        architecture_hash: architecture_hash(&head.architecture()),
        head,
        extractor_id: extractor_id.to_owned(),
        training_log,
    })
}

/// `S_IdA`: morph probability, strictly inside `(0, 1)`.
pub fn score_ida(model: &IdAModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.layout.len() {
        return Err(Error::DimensionMismatch {
            expected: model.layout.len(),
            actual: features.len(),
        });
    }
    Ok(model.head.predict_one(features))
}

/// Logistic head on document artifact features alone, scoring the document
/// without reference to the live capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHead {
    pub head: Mlp,
    pub training_log: TrainingLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactHeadParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for ArtifactHeadParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            min_delta: 1e-4,
        }
    }
}

pub fn train_artifact_head(
    train: &[(Vec<f64>, bool)],
    validation: &[(Vec<f64>, bool)],
    params: &ArtifactHeadParams,
    seed: u64,
) -> Result<ArtifactHead> {
    let Some((first, _)) = train.first() else {
        return Err(Error::TrainingData("artifact head has no training data".into()));
    };
    let positives = train.iter().filter(|(_, m)| *m).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::TrainingData(
            "artifact head needs both morph and bona fide documents".into(),
        ));
    }
    check_set(train, first.len())?;
    check_set(validation, first.len())?;
    let ida_like = IdaParams {
        hidden: Vec::new(),
        learning_rate: params.learning_rate,
        batch_size: params.batch_size,
        max_epochs: params.max_epochs,
        patience: params.patience,
        min_delta: params.min_delta,
        ..Default::default()
    };
    ida_like.validate()?;
    let rows = |set: &[(Vec<f64>, bool)]| {
        let x: Vec<Vec<f64>> = set.iter().map(|(x, _)| x.clone()).collect();
        let y: Vec<f64> = set.iter().map(|(_, m)| f64::from(u8::from(*m))).collect();
        (mlp::to_matrix(&x), y)
    };
    let (tx, ty) = rows(train);
    let (vx, vy) = rows(validation);
    let mut head = Mlp::new(first.len(), &[], seed);
    let val = (!validation.is_empty()).then_some((&vx, vy.as_slice()));
    let training_log = mlp::fit(&mut head, &tx, &ty, val, &ida_like.fit_options(seed))?;
    Ok(ArtifactHead { head, training_log })
}

impl ArtifactHead {
    pub fn score(&self, artifact: &[f64]) -> Result<f64> {
        let expected = self.head.input_dim();
        if artifact.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: artifact.len(),
            });
        }
        Ok(self.head.predict_one(artifact))
    }
}
