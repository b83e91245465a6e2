//! Shared domain types: embeddings, attempt pairs, dataset manifests and the
//! accomplice / criminal / both scenario splits.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A face identity vector produced by one embedding provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f32>,
    pub provider_id: String,
}

impl Embedding {
    pub fn new(values: Vec<f32>, provider_id: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("embedding has non-finite components".into()));
        }
        Ok(Self {
            values,
            provider_id: provider_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Fails unless both embeddings come from the same provider and share a dimension.
    pub fn check_compatible(&self, other: &Embedding) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        if self.provider_id != other.provider_id {
            return Err(Error::InvalidInput(format!(
                "embeddings from different providers: `{}` vs `{}`",
                self.provider_id, other.provider_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptLabel {
    #[serde(rename = "bonafide")]
    BonaFide,
    Criminal,
    Accomplice,
}

impl AttemptLabel {
    pub const ALL: [AttemptLabel; 3] = [
        AttemptLabel::Accomplice,
        AttemptLabel::BonaFide,
        AttemptLabel::Criminal,
    ];

    pub fn is_morph(self) -> bool {
        self != AttemptLabel::BonaFide
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttemptLabel::BonaFide => "bonafide",
            AttemptLabel::Criminal => "criminal",
            AttemptLabel::Accomplice => "accomplice",
        }
    }

    /// Position in the (accomplice, bona fide, criminal) probability triple.
    pub fn class_index(self) -> usize {
        match self {
            AttemptLabel::Accomplice => 0,
            AttemptLabel::BonaFide => 1,
            AttemptLabel::Criminal => 2,
        }
    }

    pub fn from_class_index(idx: usize) -> Option<Self> {
        match idx {
            0 => Some(AttemptLabel::Accomplice),
            1 => Some(AttemptLabel::BonaFide),
            2 => Some(AttemptLabel::Criminal),
            _ => None,
        }
    }
}

impl fmt::Display for AttemptLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttemptLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bonafide" => Ok(AttemptLabel::BonaFide),
            "criminal" => Ok(AttemptLabel::Criminal),
            "accomplice" => Ok(AttemptLabel::Accomplice),
            other => Err(Error::InvalidInput(format!("unknown label `{other}`"))),
        }
    }
}

/// Where one side of an attempt comes from: a precomputed embedding key or an image file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceRef {
    Embedding(String),
    Image(String),
}

impl SourceRef {
    pub const EMBEDDING_PREFIX: &'static str = "emb:";

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidInput("empty reference".into()));
        }
        Ok(match s.strip_prefix(Self::EMBEDDING_PREFIX) {
            Some(key) if !key.is_empty() => SourceRef::Embedding(key.to_string()),
            Some(_) => return Err(Error::InvalidInput(format!("empty embedding key in `{s}`"))),
            None => SourceRef::Image(s.to_string()),
        })
    }

    /// Key used by the embedding cache; identical to the textual form.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceRef::Embedding(k) => write!(f, "{}{}", Self::EMBEDDING_PREFIX, k),
            SourceRef::Image(p) => f.write_str(p),
        }
    }
}

impl Serialize for SourceRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SourceRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SourceRef::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// How a morph was made. `alpha` is the criminal-side blending weight and
/// `subject_ids` is (criminal, accomplice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphMeta {
    pub algorithm: String,
    pub alpha: f64,
    pub subject_ids: (String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptPair {
    pub document_ref: SourceRef,
    pub live_ref: SourceRef,
    pub label: AttemptLabel,
    pub morph_meta: Option<MorphMeta>,
}

impl AttemptPair {
    pub fn bona_fide(document_ref: SourceRef, live_ref: SourceRef) -> Self {
        Self {
            document_ref,
            live_ref,
            label: AttemptLabel::BonaFide,
            morph_meta: None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        self.morph_meta.as_ref().map(|m| m.alpha)
    }

    fn identity(&self) -> (&SourceRef, &SourceRef) {
        (&self.document_ref, &self.live_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "val" | "validation" => Ok(SplitTag::Validation),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::InvalidInput(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<AttemptPair>,
    pub source_name: String,
    pub split_tag: SplitTag,
    /// Whether the producer guarantees no subject overlap with the other splits.
    pub subject_disjoint: Option<bool>,
}

/// One manifest line as stored on disk (CSV columns or JSON-lines keys).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub document_ref: String,
    pub live_ref: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_b: Option<String>,
}

impl ManifestRow {
    fn into_pair(self, row: usize) -> Result<AttemptPair> {
        let wrap = |e: Error| Error::Manifest {
            row,
            reason: e.to_string(),
        };
        let label: AttemptLabel = self.label.parse().map_err(wrap)?;
        let morph_algorithm = self.morph_algorithm.filter(|s| !s.trim().is_empty());
        let morph_meta = match (self.alpha, morph_algorithm) {
            (Some(alpha), algorithm) => Some(MorphMeta {
                algorithm: algorithm.unwrap_or_else(|| "unspecified".to_string()),
                alpha,
                subject_ids: (
                    self.subject_a.unwrap_or_default(),
                    self.subject_b.unwrap_or_default(),
                ),
            }),
            (None, Some(_)) => {
                return Err(Error::Manifest {
                    row,
                    reason: "morph_algorithm given without alpha".into(),
                })
            }
            (None, None) => None,
        };
        Ok(AttemptPair {
            document_ref: SourceRef::parse(&self.document_ref).map_err(wrap)?,
            live_ref: SourceRef::parse(&self.live_ref).map_err(wrap)?,
            label,
            morph_meta,
        })
    }

    fn from_pair(pair: &AttemptPair) -> Self {
        let meta = pair.morph_meta.as_ref();
        Self {
            document_ref: pair.document_ref.to_string(),
            live_ref: pair.live_ref.to_string(),
            label: pair.label.as_str().to_string(),
            morph_algorithm: meta.map(|m| m.algorithm.clone()),
            alpha: meta.map(|m| m.alpha),
            subject_a: meta.map(|m| m.subject_ids.0.clone()),
            subject_b: meta.map(|m| m.subject_ids.1.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ManifestFormat {
    Csv,
    JsonLines,
}

impl ManifestFormat {
    fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(ManifestFormat::Csv),
            Some("jsonl") | Some("ndjson") => Ok(ManifestFormat::JsonLines),
            _ => Err(Error::InvalidInput(format!(
                "manifest `{}` must end in .csv or .jsonl",
                path.display()
            ))),
        }
    }
}

impl DatasetManifest {
    pub fn new(entries: Vec<AttemptPair>, source_name: impl Into<String>, split_tag: SplitTag) -> Self {
        Self {
            entries,
            source_name: source_name.into(),
            split_tag,
            subject_disjoint: None,
        }
    }

    pub fn from_rows(rows: Vec<ManifestRow>, source_name: &str, split_tag: SplitTag) -> Result<Self> {
        let entries = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.into_pair(i + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(entries, source_name, split_tag))
    }

    pub fn load(path: &Path, split_tag: SplitTag) -> Result<Self> {
        let format = ManifestFormat::from_path(path)?;
        let source_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let rows: Vec<ManifestRow> = match format {
            ManifestFormat::Csv => {
                let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
                rdr.deserialize().collect::<std::result::Result<_, _>>()?
            }
            ManifestFormat::JsonLines => {
                let mut rows = Vec::new();
                for (i, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    rows.push(serde_json::from_str(&line).map_err(|e| Error::Manifest {
                        row: i + 1,
                        reason: e.to_string(),
                    })?);
                }
                rows
            }
        };
        Self::from_rows(rows, &source_name, split_tag)
    }

    /// Writes the manifest in the format implied by the file extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let format = ManifestFormat::from_path(path)?;
        let mut buf: Vec<u8> = Vec::new();
        match format {
            ManifestFormat::Csv => {
                // Fixed column set so every row has the same shape.
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record([
                    "document_ref",
                    "live_ref",
                    "label",
                    "morph_algorithm",
                    "alpha",
                    "subject_a",
                    "subject_b",
                ])?;
                for pair in &self.entries {
                    let r = ManifestRow::from_pair(pair);
                    w.write_record([
                        r.document_ref,
                        r.live_ref,
                        r.label,
                        r.morph_algorithm.unwrap_or_default(),
                        r.alpha.map(|a| a.to_string()).unwrap_or_default(),
                        r.subject_a.unwrap_or_default(),
                        r.subject_b.unwrap_or_default(),
                    ])?;
                }
                w.flush().map_err(|e| Error::io(path, e))?;
            }
            ManifestFormat::JsonLines => {
                for pair in &self.entries {
                    serde_json::to_writer(&mut buf, &ManifestRow::from_pair(pair))?;
                    buf.push(b'\n');
                }
            }
        }
        crate::io::write_atomic(path, &buf)
    }

    /// Concatenates manifests, dropping repeated bona fide pairs so that a
    /// shared bona fide set listed in several benchmark files appears once.
    pub fn merge(manifests: &[DatasetManifest], source_name: &str, split_tag: SplitTag) -> Self {
        let mut seen_bf = HashSet::new();
        let mut entries = Vec::new();
        for m in manifests {
            for pair in &m.entries {
                if pair.label == AttemptLabel::BonaFide
                    && !seen_bf.insert((pair.document_ref.clone(), pair.live_ref.clone()))
                {
                    continue;
                }
                entries.push(pair.clone());
            }
        }
        Self::new(entries, source_name, split_tag)
    }
}

/// Checks whether a reference can be loaded.
pub trait RefResolver {
    fn resolves(&self, r: &SourceRef) -> bool;
}

/// Accepts every reference; for manifests whose references are checked later.
pub struct AcceptAll;

impl RefResolver for AcceptAll {
    fn resolves(&self, _r: &SourceRef) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub bona_fide: usize,
    pub criminal: usize,
    pub accomplice: usize,
}

impl LabelCounts {
    pub fn of<'a>(pairs: impl IntoIterator<Item = &'a AttemptPair>) -> Self {
        let mut c = LabelCounts::default();
        for p in pairs {
            match p.label {
                AttemptLabel::BonaFide => c.bona_fide += 1,
                AttemptLabel::Criminal => c.criminal += 1,
                AttemptLabel::Accomplice => c.accomplice += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.bona_fide + self.criminal + self.accomplice
    }

    pub fn get(&self, label: AttemptLabel) -> usize {
        match label {
            AttemptLabel::BonaFide => self.bona_fide,
            AttemptLabel::Criminal => self.criminal,
            AttemptLabel::Accomplice => self.accomplice,
        }
    }
}

/// A manifest whose invariants have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedManifest {
    manifest: DatasetManifest,
    counts: LabelCounts,
}

impl ValidatedManifest {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[AttemptPair] {
        &self.manifest.entries
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    pub fn into_inner(self) -> DatasetManifest {
        self.manifest
    }
}

pub fn validate_manifest(
    manifest: DatasetManifest,
    resolver: &dyn RefResolver,
) -> Result<ValidatedManifest> {
    let mut seen = HashSet::new();
    for (i, pair) in manifest.entries.iter().enumerate() {
        let row = i + 1;
        for r in [&pair.document_ref, &pair.live_ref] {
            if !resolver.resolves(r) {
                return Err(Error::Unresolvable(r.to_string()));
            }
        }
        match (&pair.morph_meta, pair.label) {
            (None, label) if label.is_morph() => return Err(Error::MissingMorphMeta(row)),
            (Some(_), AttemptLabel::BonaFide) => {
                return Err(Error::Manifest {
                    row,
                    reason: "bona fide pair carries morph metadata".into(),
                })
            }
            (Some(meta), _) if !(0.0..=1.0).contains(&meta.alpha) => {
                return Err(Error::AlphaOutOfRange {
                    row,
                    alpha: meta.alpha,
                })
            }
            _ => {}
        }
        if !seen.insert(pair.identity()) {
            return Err(Error::Manifest {
                row,
                reason: format!(
                    "duplicate pair ({}, {})",
                    pair.document_ref, pair.live_ref
                ),
            });
        }
    }
    let counts = LabelCounts::of(&manifest.entries);
    Ok(ValidatedManifest { manifest, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Accomplice,
    Criminal,
    Both,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Accomplice, Scenario::Criminal, Scenario::Both];

    /// Whether pairs carrying `label` belong to this scenario.
    pub fn admits(self, label: AttemptLabel) -> bool {
        match (self, label) {
            (_, AttemptLabel::BonaFide) | (Scenario::Both, _) => true,
            (Scenario::Accomplice, l) => l == AttemptLabel::Accomplice,
            (Scenario::Criminal, l) => l == AttemptLabel::Criminal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Accomplice => "accomplice",
            Scenario::Criminal => "criminal",
            Scenario::Both => "both",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accomplice" => Ok(Scenario::Accomplice),
            "criminal" => Ok(Scenario::Criminal),
            "both" => Ok(Scenario::Both),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSplit {
    pub scenario: Scenario,
    pub pairs: Vec<AttemptPair>,
}

impl ScenarioSplit {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when the split cannot yield error rates (one side missing).
    pub fn is_degenerate(&self) -> bool {
        let c = LabelCounts::of(&self.pairs);
        c.bona_fide == 0 || c.bona_fide == c.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSplits {
    pub accomplice: ScenarioSplit,
    pub criminal: ScenarioSplit,
    pub both: ScenarioSplit,
    pub warnings: Vec<String>,
}

impl ScenarioSplits {
    pub fn get(&self, scenario: Scenario) -> &ScenarioSplit {
        match scenario {
            Scenario::Accomplice => &self.accomplice,
            Scenario::Criminal => &self.criminal,
            Scenario::Both => &self.both,
        }
    }
}

pub fn split_scenarios(manifest: &ValidatedManifest) -> ScenarioSplits {
    let split = |scenario: Scenario| ScenarioSplit {
        scenario,
        pairs: manifest
            .entries()
            .iter()
            .filter(|p| scenario.admits(p.label))
            .cloned()
            .collect(),
    };
    let splits = [
        split(Scenario::Accomplice),
        split(Scenario::Criminal),
        split(Scenario::Both),
    ];
    let mut warnings = Vec::new();
    for s in &splits {
        if s.is_empty() {
            warnings.push(format!("{} split is empty", s.scenario));
        } else if s.is_degenerate() {
            warnings.push(format!("{} split has only one class", s.scenario));
        }
    }
    let [accomplice, criminal, both] = splits;
    ScenarioSplits {
        accomplice,
        criminal,
        both,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(k: &str) -> SourceRef {
        SourceRef::Embedding(k.to_string())
    }

    fn morph(doc: &str, live: &str, label: AttemptLabel, alpha: f64) -> AttemptPair {
        AttemptPair {
            document_ref: emb(doc),
            live_ref: emb(live),
            label,
            morph_meta: Some(MorphMeta {
                algorithm: "synthetic".into(),
                alpha,
                subject_ids: ("c".into(), "a".into()),
            }),
        }
    }

    fn manifest(entries: Vec<AttemptPair>) -> DatasetManifest {
        DatasetManifest::new(entries, "t", SplitTag::Test)
    }

    #[test]
    fn validates_and_counts() {
        let m = manifest(vec![
            AttemptPair::bona_fide(emb("d1"), emb("l1")),
            AttemptPair::bona_fide(emb("d2"), emb("l2")),
            morph("m1", "l3", AttemptLabel::Criminal, 0.3),
            morph("m2", "l4", AttemptLabel::Criminal, 0.3),
        ]);
        let v = validate_manifest(m, &AcceptAll).unwrap();
        assert_eq!(
            v.counts(),
            LabelCounts {
                bona_fide: 2,
                criminal: 2,
                accomplice: 0
            }
        );
    }

    #[test]
    fn rejects_missing_meta() {
        let mut p = morph("m1", "l1", AttemptLabel::Criminal, 0.3);
        p.morph_meta = None;
        let err = validate_manifest(manifest(vec![p]), &AcceptAll).unwrap_err();
        assert!(err.to_string().contains("missing morph metadata"), "{err}");
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let p = morph("m1", "l1", AttemptLabel::Accomplice, 1.2);
        let err = validate_manifest(manifest(vec![p]), &AcceptAll).unwrap_err();
        assert!(err.to_string().contains("alpha out of range"), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_unresolvable() {
        let m = manifest(vec![
            AttemptPair::bona_fide(emb("d1"), emb("l1")),
            AttemptPair::bona_fide(emb("d1"), emb("l1")),
        ]);
        assert!(validate_manifest(m, &AcceptAll).is_err());

        struct Nothing;
        impl RefResolver for Nothing {
            fn resolves(&self, _r: &SourceRef) -> bool {
                false
            }
        }
        let m = manifest(vec![AttemptPair::bona_fide(emb("d1"), emb("l1"))]);
        assert!(matches!(
            validate_manifest(m, &Nothing),
            Err(Error::Unresolvable(_))
        ));
    }

    #[test]
    fn split_sizes() {
        let mut entries = vec![
            AttemptPair::bona_fide(emb("d1"), emb("l1")),
            AttemptPair::bona_fide(emb("d2"), emb("l2")),
        ];
        for i in 0..3 {
            entries.push(morph(&format!("m{i}"), &format!("c{i}"), AttemptLabel::Criminal, 0.3));
            entries.push(morph(&format!("m{i}"), &format!("a{i}"), AttemptLabel::Accomplice, 0.3));
        }
        let v = validate_manifest(manifest(entries), &AcceptAll).unwrap();
        let s = split_scenarios(&v);
        assert_eq!(s.accomplice.pairs.len(), 5);
        assert_eq!(s.criminal.pairs.len(), 5);
        assert_eq!(s.both.pairs.len(), 8);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn empty_split_warns() {
        let v = validate_manifest(
            manifest(vec![morph("m", "c", AttemptLabel::Criminal, 0.5)]),
            &AcceptAll,
        )
        .unwrap();
        let s = split_scenarios(&v);
        assert_eq!(s.criminal.pairs.len(), 1);
        assert_eq!(s.accomplice.pairs.len(), 0);
        assert!(s.warnings.iter().any(|w| w.contains("accomplice split is empty")));
    }

    #[test]
    fn merge_dedups_bona_fide() {
        let bf = AttemptPair::bona_fide(emb("d1"), emb("l1"));
        let a = manifest(vec![bf.clone(), morph("m", "a", AttemptLabel::Accomplice, 0.3)]);
        let c = manifest(vec![bf, morph("m", "c", AttemptLabel::Criminal, 0.3)]);
        let both = DatasetManifest::merge(&[a, c], "both", SplitTag::Test);
        assert_eq!(both.entries.len(), 3);
        assert!(validate_manifest(both, &AcceptAll).is_ok());
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(vec![
            AttemptPair::bona_fide(emb("d1"), SourceRef::Image("img/l1.png".into())),
            morph("m1", "l3", AttemptLabel::Criminal, 0.3),
        ]);
        for name in ["m.csv", "m.jsonl"] {
            let path = dir.path().join(name);
            m.save(&path).unwrap();
            let back = DatasetManifest::load(&path, SplitTag::Test).unwrap();
            assert_eq!(back.entries, m.entries);
        }
    }

    #[test]
    fn parses_label_strings() {
        let rows = vec![ManifestRow {
            document_ref: "emb:x".into(),
            live_ref: "faces/y.png".into(),
            label: "accomplice".into(),
            morph_algorithm: Some("facemorpher".into()),
            alpha: Some(0.3),
            subject_a: Some("s1".into()),
            subject_b: Some("s2".into()),
        }];
        let m = DatasetManifest::from_rows(rows, "x", SplitTag::Train).unwrap();
        assert_eq!(m.entries[0].label, AttemptLabel::Accomplice);
        assert_eq!(m.entries[0].live_ref, SourceRef::Image("faces/y.png".into()));
        let bad = vec![ManifestRow {
            label: "morphed".into(),
            document_ref: "a".into(),
            live_ref: "b".into(),
            ..Default::default()
        }];
        assert!(DatasetManifest::from_rows(bad, "x", SplitTag::Train).is_err());
    }
}
