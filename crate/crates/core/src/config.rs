//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ac::AcParams;
use crate::embeddings::ProviderSpec;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::id::IdParams;
use crate::ida::{ArtifactHeadParams, IdaParams};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    /// Directory of precomputed vectors (synthetic embeddings, artifact
    /// vectors, pretrained artifact features).
    pub store: Option<PathBuf>,
    /// Directory where computed embeddings are cached.
    pub cache_dir: Option<PathBuf>,
    /// Base directory for relative image references.
    pub image_root: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for pair scoring; 0 uses every available core.
    pub jobs: usize,
    /// Provider id under which document artifact vectors are stored.
    pub artifact_channel: String,
    pub provider: ProviderSpec,
    pub ac: AcParams,
    pub id: IdParams,
    pub ida: IdaParams,
    pub artifact_head: ArtifactHeadParams,
    pub fusion: FusionConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            artifact_channel: crate::synth::SYNTHETIC_ARTIFACT.to_string(),
            provider: ProviderSpec::default(),
            ac: AcParams::default(),
            id: IdParams::default(),
            ida: IdaParams::default(),
            artifact_head: ArtifactHeadParams::default(),
            fusion: FusionConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.provider.dimension == 0 {
            return Err(Error::Config("provider.dimension must be positive".into()));
        }
        for (name, c, g) in [("ac", self.ac.c, self.ac.gamma), ("id", self.id.c, self.id.gamma)] {
            if !(c > 0.0 && c.is_finite() && g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("{name}.c and {name}.gamma must be positive")));
            }
        }
        self.ida.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.ac.c, c.ac.gamma), (1.0, 1e-3));
        assert_eq!((c.id.c, c.id.gamma), (1.0, 1e-3));
        assert_eq!(c.ida.hidden, vec![250, 125, 64]);
        assert_eq!(c.ida.learning_rate, 1e-5);
        assert_eq!(c.ida.extractor.conv.learning_rate, 1e-3);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("[fuson]\nmode = \"weighted\"\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("fuson"), "{err}");
        let err = RunConfig::from_toml_str("[fusion]\nmdoe = \"weighted\"\n").unwrap_err();
        assert!(err.to_string().contains("mdoe"), "{err}");
    }

    #[test]
    fn partial_config_fills_defaults_and_round_trips() {
        let c = RunConfig::from_toml_str(
            "seed = 7\n[fusion]\nmode = \"selection\"\nbona_fide_route = \"bf_to_ida\"\n[ida]\nlearning_rate = 0.001\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.fusion.mode, crate::fusion::FusionMode::Selection);
        assert_eq!(c.ida.hidden, vec![250, 125, 64]);
        let again = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[ac]\nc = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[ida]\nhidden = [0]\n").is_err());
    }
}
