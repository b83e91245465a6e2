//! Pipeline bundles: a directory holding every trained model plus a JSON
//! manifest with versions, seeds, the config snapshot and architecture hashes.
//!
//! Floats are written in shortest round-trip form, so a reloaded bundle
//! scores bit-identically.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::embeddings::ProviderSpec;
use crate::error::{Error, Result};
use crate::ida::{architecture_hash, ExtractorSpec};
use crate::io::{read_json, write_json};
use crate::pipeline::PipelineModels;

pub const BUNDLE_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AC_FILE: &str = "ac.model";
pub const ID_FILE: &str = "id.model";
pub const IDA_HEAD_FILE: &str = "ida.head";
pub const IDA_EXTRACTOR_FILE: &str = "ida.extractor";
pub const ARTIFACT_HEAD_FILE: &str = "artifact.head";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub crate_version: String,
    pub seed: u64,
    pub provider: ProviderSpec,
    pub config: RunConfig,
    pub architecture_hashes: BTreeMap<String, String>,
}

pub fn save_bundle(models: &PipelineModels, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut hashes = BTreeMap::new();
    hashes.insert("ida.head".to_string(), models.ida.architecture_hash.clone());
    if let Some(h) = &models.artifact_head {
        hashes.insert("artifact.head".to_string(), architecture_hash(&h.head.architecture()));
    }
    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: models.seed,
        provider: models.provider.clone(),
        config: models.config.clone(),
        architecture_hashes: hashes,
    };
    write_json(&dir.join(AC_FILE), &models.ac)?;
    write_json(&dir.join(ID_FILE), &models.id)?;
    write_json(&dir.join(IDA_HEAD_FILE), &models.ida)?;
    write_json(&dir.join(IDA_EXTRACTOR_FILE), &models.extractor)?;
    let head_path = dir.join(ARTIFACT_HEAD_FILE);
    match &models.artifact_head {
        Some(h) => write_json(&head_path, h)?,
        None if head_path.exists() => std::fs::remove_file(&head_path).map_err(|e| Error::io(&head_path, e))?,
        None => {}
    }
    // Written last so a partially written bundle has no manifest.
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn read_bundle_manifest(dir: &Path) -> Result<BundleManifest> {
    #[derive(Deserialize)]
    struct VersionOnly {
        version: u32,
    }
    let path = dir.join(MANIFEST_FILE);
    let v: VersionOnly = read_json(&path)?;
    if v.version != BUNDLE_VERSION {
        return Err(Error::BundleVersion {
            found: v.version,
            expected: BUNDLE_VERSION,
        });
    }
    read_json(&path)
}

pub fn load_bundle(dir: &Path) -> Result<PipelineModels> {
    let manifest = read_bundle_manifest(dir)?;
    let head_path = dir.join(ARTIFACT_HEAD_FILE);
    let models = PipelineModels {
        seed: manifest.seed,
        config: manifest.config,
        provider: manifest.provider,
        extractor: read_json::<ExtractorSpec>(&dir.join(IDA_EXTRACTOR_FILE))?,
        ac: read_json(&dir.join(AC_FILE))?,
        id: read_json(&dir.join(ID_FILE))?,
        ida: read_json(&dir.join(IDA_HEAD_FILE))?,
        artifact_head: if head_path.exists() { Some(read_json(&head_path)?) } else { None },
    };
    let actual = architecture_hash(&models.ida.head.architecture());
    if manifest.architecture_hashes.get("ida.head") != Some(&actual) {
        return Err(Error::Model(format!(
            "identity-artifact head does not match the recorded architecture hash ({actual})"
        )));
    }
    Ok(models)
}
