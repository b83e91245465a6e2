//! Embedding-space benchmark generator.
//!
//! Identities are random directions on the unit sphere. A morph document is
//! the renormalized blend `alpha * e_criminal + (1 - alpha) * e_accomplice`
//! plus capture noise; live captures are the subject's identity plus noise.
//! Morph documents additionally carry a fixed artifact direction in a
//! separate channel, which bona fide documents lack. This is a deliberate
//! simplification meant for exercising the pipeline end to end, not a model
//! of real morphing algorithms.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{AttemptLabel, AttemptPair, DatasetManifest, MorphMeta, SourceRef, SplitTag};
use crate::embeddings::{cosine, EmbeddingCache};
use crate::error::{Error, Result};
use crate::io::write_json;

/// Provider id under which identity embeddings are stored.
pub const SYNTHETIC_PROVIDER: &str = "synthetic";
/// Provider id under which document artifact vectors are stored.
pub const SYNTHETIC_ARTIFACT: &str = "synthetic-artifact";
pub const MORPH_ALGORITHM: &str = "synthetic-blend";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_identities: usize,
    /// Identity embedding dimension.
    pub d: usize,
    /// Artifact channel dimension.
    pub d_a: usize,
    pub alpha_set: Vec<f64>,
    /// Capture noise, as the expected norm of the noise relative to the unit identity.
    pub live_noise_sigma: f64,
    /// Length of the artifact direction added to morph documents.
    pub artifact_strength: f64,
    /// Expected norm of the artifact-channel noise.
    pub artifact_noise_sigma: f64,
    /// Morphs in which each subject acts as the criminal, per alpha.
    pub morphs_per_subject: usize,
    pub bona_fide_per_subject: usize,
    /// Subject fractions for (train, validation); the rest is test.
    pub split_fractions: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_identities: 200,
            d: 64,
            d_a: 64,
            alpha_set: vec![0.3, 0.5],
            live_noise_sigma: 0.4,
            artifact_strength: 0.4,
            artifact_noise_sigma: 1.0,
            morphs_per_subject: 2,
            bona_fide_per_subject: 2,
            split_fractions: (0.6, 0.2),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_identities < 4 {
            return fail(format!("n_identities must be at least 4, got {}", self.n_identities));
        }
        if self.d < 2 {
            return fail(format!("embedding dimension must be at least 2, got {}", self.d));
        }
        if self.d_a == 0 {
            return fail("artifact dimension must be positive".into());
        }
        if self.alpha_set.is_empty() {
            return fail("alpha_set must not be empty".into());
        }
        if let Some(a) = self.alpha_set.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return fail(format!("alpha {a} outside (0, 1)"));
        }
        for (name, v) in [
            ("live_noise_sigma", self.live_noise_sigma),
            ("artifact_strength", self.artifact_strength),
            ("artifact_noise_sigma", self.artifact_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.morphs_per_subject == 0 || self.bona_fide_per_subject == 0 {
            return fail("morphs_per_subject and bona_fide_per_subject must be positive".into());
        }
        let (tr, va) = self.split_fractions;
        if !(tr > 0.0 && va > 0.0 && tr + va < 1.0) {
            return fail(format!("invalid split fractions ({tr}, {va})"));
        }
        Ok(())
    }
}

/// 64-bit mix used to derive independent sub-seeds.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, stream))
}

fn gaussian(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn unit_direction(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, d, 1.0);
        if v.iter().any(|x| *x != 0.0) {
            return normalize(v);
        }
    }
}

/// Noise whose expected squared norm is `sigma^2`.
fn noise(rng: &mut impl Rng, d: usize, sigma: f64) -> Vec<f64> {
    gaussian(rng, d, sigma / (d as f64).sqrt())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `n_identities` i.i.d. unit directions in dimension `d`.
pub fn gen_identities(config: &SyntheticConfig) -> Result<Vec<Vec<f64>>> {
    if config.d < 2 {
        return Err(Error::Config(format!(
            "embedding dimension must be at least 2, got {}",
            config.d
        )));
    }
    let mut rng = rng_for(config.seed, 0);
    Ok((0..config.n_identities)
        .map(|_| unit_direction(&mut rng, config.d))
        .collect())
}

/// The fixed artifact direction of a benchmark.
pub fn artifact_pattern(config: &SyntheticConfig) -> Vec<f64> {
    unit_direction(&mut rng_for(config.seed, 1), config.d_a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAttempt {
    pub doc_embedding: Vec<f64>,
    pub live_embedding: Vec<f64>,
    pub doc_artifact: Vec<f64>,
    pub label: AttemptLabel,
    pub alpha: Option<f64>,
}

/// Identities taking part in one attempt.
#[derive(Debug, Clone, Copy)]
pub enum AttemptSubjects<'a> {
    BonaFide(&'a [f64]),
    Morph {
        criminal: &'a [f64],
        accomplice: &'a [f64],
    },
}

pub fn capture(identity: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    normalize(add(identity, &noise(rng, identity.len(), sigma)))
}

pub fn morph_document(
    criminal: &[f64],
    accomplice: &[f64],
    alpha: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if criminal == accomplice {
        return Err(Error::InvalidInput(
            "a morph needs two distinct identities".into(),
        ));
    }
    let blend: Vec<f64> = criminal
        .iter()
        .zip(accomplice)
        .map(|(c, a)| alpha * c + (1.0 - alpha) * a)
        .collect();
    Ok(normalize(add(&blend, &noise(rng, criminal.len(), sigma))))
}

pub fn document_artifact(
    morphed: bool,
    pattern: &[f64],
    config: &SyntheticConfig,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let n = noise(rng, pattern.len(), config.artifact_noise_sigma);
    if morphed {
        pattern
            .iter()
            .zip(&n)
            .map(|(p, e)| config.artifact_strength * p + e)
            .collect()
    } else {
        n
    }
}

/// One attempt of kind `kind`. For morph kinds the live capture comes from
/// the criminal or the accomplice accordingly.
pub fn gen_attempt(
    subjects: AttemptSubjects<'_>,
    alpha: f64,
    kind: AttemptLabel,
    config: &SyntheticConfig,
    pattern: &[f64],
    rng: &mut impl Rng,
) -> Result<SyntheticAttempt> {
    let sigma = config.live_noise_sigma;
    match (subjects, kind) {
        (AttemptSubjects::BonaFide(e), AttemptLabel::BonaFide) => Ok(SyntheticAttempt {
            doc_embedding: capture(e, sigma, rng),
            live_embedding: capture(e, sigma, rng),
            doc_artifact: document_artifact(false, pattern, config, rng),
            label: kind,
            alpha: None,
        }),
        (AttemptSubjects::Morph { criminal, accomplice }, AttemptLabel::Criminal | AttemptLabel::Accomplice) => {
            let doc = morph_document(criminal, accomplice, alpha, sigma, rng)?;
            let live_identity = if kind == AttemptLabel::Criminal { criminal } else { accomplice };
            Ok(SyntheticAttempt {
                doc_embedding: doc,
                live_embedding: capture(live_identity, sigma, rng),
                doc_artifact: document_artifact(true, pattern, config, rng),
                label: kind,
                alpha: Some(alpha),
            })
        }
        _ => Err(Error::InvalidInput(format!(
            "subjects do not match attempt kind {kind}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBin {
    pub lower: f64,
    pub upper: f64,
    pub criminal: usize,
    pub accomplice: usize,
    pub bona_fide: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: SplitTag,
    pub subjects: usize,
    pub bona_fide: usize,
    pub criminal: usize,
    pub accomplice: usize,
    pub mean_cosine_bona_fide: f64,
    pub mean_cosine_criminal: f64,
    pub mean_cosine_accomplice: f64,
    pub similarity_bins: Vec<SimilarityBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub config: SyntheticConfig,
    pub subject_disjoint: bool,
    pub splits: Vec<SplitStats>,
}

pub struct SyntheticBenchmark {
    pub train: DatasetManifest,
    pub validation: DatasetManifest,
    pub test: DatasetManifest,
    /// Identity embeddings under [`SYNTHETIC_PROVIDER`], document artifacts
    /// under [`SYNTHETIC_ARTIFACT`].
    pub store: EmbeddingCache,
    pub summary: BenchmarkSummary,
    /// Subject ids per split, in (train, validation, test) order.
    pub subjects: [Vec<String>; 3],
}

const SUMMARY_BINS: usize = 10;

fn split_stats(
    split: SplitTag,
    subjects: usize,
    pairs: &[(AttemptLabel, f64)],
) -> SplitStats {
    let mean = |label: AttemptLabel| {
        let v: Vec<f64> = pairs.iter().filter(|p| p.0 == label).map(|p| p.1).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / SUMMARY_BINS as f64;
    let mut bins: Vec<SimilarityBin> = (0..SUMMARY_BINS)
        .map(|b| SimilarityBin {
            lower: lo + b as f64 * width,
            upper: if b + 1 == SUMMARY_BINS { hi } else { lo + (b + 1) as f64 * width },
            criminal: 0,
            accomplice: 0,
            bona_fide: 0,
        })
        .collect();
    for &(label, c) in pairs {
        let b = if width > 0.0 {
            (((c - lo) / width) as usize).min(SUMMARY_BINS - 1)
        } else {
            0
        };
        match label {
            AttemptLabel::BonaFide => bins[b].bona_fide += 1,
            AttemptLabel::Criminal => bins[b].criminal += 1,
            AttemptLabel::Accomplice => bins[b].accomplice += 1,
        }
    }
    let count = |l: AttemptLabel| pairs.iter().filter(|p| p.0 == l).count();
    SplitStats {
        split,
        subjects,
        bona_fide: count(AttemptLabel::BonaFide),
        criminal: count(AttemptLabel::Criminal),
        accomplice: count(AttemptLabel::Accomplice),
        mean_cosine_bona_fide: mean(AttemptLabel::BonaFide),
        mean_cosine_criminal: mean(AttemptLabel::Criminal),
        mean_cosine_accomplice: mean(AttemptLabel::Accomplice),
        similarity_bins: bins,
    }
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Generates subject-disjoint train / validation / test manifests and the
/// vectors they reference.
pub fn gen_benchmark(config: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    config.validate()?;
    let identities = gen_identities(config)?;
    let pattern = artifact_pattern(config);

    let n = config.n_identities;
    let n_train = (n as f64 * config.split_fractions.0).round() as usize;
    let n_val = (n as f64 * config.split_fractions.1).round() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    if n_train < 2 || n_val < 2 || n_test < 2 {
        return Err(Error::Config(format!(
            "{n} identities are too few for disjoint splits ({n_train}/{n_val}/{n_test}); each split needs at least 2 subjects"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(config.seed, 2));
    let ranges = [
        (SplitTag::Train, "train", &order[..n_train]),
        (SplitTag::Validation, "val", &order[n_train..n_train + n_val]),
        (SplitTag::Test, "test", &order[n_train + n_val..]),
    ];

    let store = EmbeddingCache::in_memory();
    let sigma = config.live_noise_sigma;
    let mut manifests = Vec::new();
    let mut stats = Vec::new();
    let mut subject_lists: Vec<Vec<String>> = Vec::new();
    let mut stream = 1000u64;
    let subject_id = |i: usize| format!("s{i:04}");

    for (tag, name, members) in ranges {
        let mut entries = Vec::new();
        let mut sims = Vec::new();
        let put = |key: &str, emb: &[f64], artifact: Option<&[f64]>| {
            let r = SourceRef::Embedding(key.to_string()).key();
            store.insert(SYNTHETIC_PROVIDER, &r, &to_f32(emb));
            if let Some(a) = artifact {
                store.insert(SYNTHETIC_ARTIFACT, &r, &to_f32(a));
            }
            SourceRef::Embedding(key.to_string())
        };

        for &s in members {
            for k in 0..config.bona_fide_per_subject {
                stream += 1;
                let mut rng = rng_for(config.seed, stream);
                let a = gen_attempt(
                    AttemptSubjects::BonaFide(&identities[s]),
                    0.0,
                    AttemptLabel::BonaFide,
                    config,
                    &pattern,
                    &mut rng,
                )?;
                let sid = subject_id(s);
                let doc = put(&format!("{name}/doc/{sid}_{k}"), &a.doc_embedding, Some(&a.doc_artifact));
                let live = put(&format!("{name}/live/{sid}_bf{k}"), &a.live_embedding, None);
                sims.push((AttemptLabel::BonaFide, cosine(&a.doc_embedding, &a.live_embedding)?));
                entries.push(AttemptPair::bona_fide(doc, live));
            }
        }

        let mut morph_idx = 0usize;
        for &alpha in &config.alpha_set {
            for (pos, &crim) in members.iter().enumerate() {
                for _ in 0..config.morphs_per_subject {
                    stream += 1;
                    let mut rng = rng_for(config.seed, stream);
                    let mut other = rng.random_range(0..members.len() - 1);
                    if other >= pos {
                        other += 1;
                    }
                    let acc = members[other];
                    let doc_vec = morph_document(&identities[crim], &identities[acc], alpha, sigma, &mut rng)?;
                    let artifact = document_artifact(true, &pattern, config, &mut rng);
                    let doc = put(&format!("{name}/morph/{morph_idx:05}"), &doc_vec, Some(&artifact));
                    let meta = MorphMeta {
                        algorithm: MORPH_ALGORITHM.to_string(),
                        alpha,
                        subject_ids: (subject_id(crim), subject_id(acc)),
                    };
                    for (label, who) in [(AttemptLabel::Criminal, crim), (AttemptLabel::Accomplice, acc)] {
                        let live_vec = capture(&identities[who], sigma, &mut rng);
                        let tag = if label == AttemptLabel::Criminal { 'c' } else { 'a' };
                        let live = put(
                            &format!("{name}/live/{}_m{morph_idx:05}{tag}", subject_id(who)),
                            &live_vec,
                            None,
                        );
                        sims.push((label, cosine(&doc_vec, &live_vec)?));
                        entries.push(AttemptPair {
                            document_ref: doc.clone(),
                            live_ref: live,
                            label,
                            morph_meta: Some(meta.clone()),
                        });
                    }
                    morph_idx += 1;
                }
            }
        }

        let mut manifest = DatasetManifest::new(entries, name, tag);
        manifest.subject_disjoint = Some(true);
        stats.push(split_stats(tag, members.len(), &sims));
        subject_lists.push(members.iter().map(|&i| subject_id(i)).collect());
        manifests.push(manifest);
    }

    let test = manifests.pop().expect("three splits");
    let validation = manifests.pop().expect("three splits");
    let train = manifests.pop().expect("three splits");
    let [s_train, s_val, s_test]: [Vec<String>; 3] =
        subject_lists.try_into().expect("three splits");
    Ok(SyntheticBenchmark {
        train,
        validation,
        test,
        store,
        summary: BenchmarkSummary {
            config: config.clone(),
            subject_disjoint: true,
            splits: stats,
        },
        subjects: [s_train, s_val, s_test],
    })
}

impl SyntheticBenchmark {
    pub const TRAIN_FILE: &'static str = "train.csv";
    pub const VALIDATION_FILE: &'static str = "val.csv";
    pub const TEST_FILE: &'static str = "test.csv";
    pub const CACHE_DIR: &'static str = "embeddings";
    pub const SUMMARY_FILE: &'static str = "summary.json";

    /// Writes the three manifests, the vector store and a summary into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.train.save(&dir.join(Self::TRAIN_FILE))?;
        self.validation.save(&dir.join(Self::VALIDATION_FILE))?;
        self.test.save(&dir.join(Self::TEST_FILE))?;
        let cache = EmbeddingCache::create(dir.join(Self::CACHE_DIR));
        for m in [&self.train, &self.validation, &self.test] {
            for p in &m.entries {
                for r in [&p.document_ref, &p.live_ref] {
                    let key = r.key();
                    for provider in [SYNTHETIC_PROVIDER, SYNTHETIC_ARTIFACT] {
                        if let Some(v) = self.store.get(provider, &key) {
                            cache.insert(provider, &key, &v);
                        }
                    }
                }
            }
        }
        cache.flush()?;
        write_json(&dir.join(Self::SUMMARY_FILE), &self.summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_identities: 30,
            ..Default::default()
        }
    }

    #[test]
    fn identities_are_unit_and_seeded() {
        let cfg = SyntheticConfig {
            n_identities: 100,
            d: 512,
            ..Default::default()
        };
        let ids = gen_identities(&cfg).unwrap();
        for v in &ids {
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
        assert_eq!(ids, gen_identities(&cfg).unwrap());
        let mut max_cos: f64 = 0.0;
        for i in 0..ids.len() {
            for j in 0..i {
                max_cos = max_cos.max(cosine(&ids[i], &ids[j]).unwrap().abs());
            }
        }
        assert!(max_cos < 0.4, "{max_cos}");
        assert!(gen_identities(&SyntheticConfig { d: 1, ..cfg }).is_err());
    }

    #[test]
    fn attempt_geometry() {
        let cfg = SyntheticConfig {
            live_noise_sigma: 0.0,
            ..small()
        };
        let ids = gen_identities(&cfg).unwrap();
        let pat = artifact_pattern(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bf = gen_attempt(AttemptSubjects::BonaFide(&ids[0]), 0.0, AttemptLabel::BonaFide, &cfg, &pat, &mut rng).unwrap();
        assert!((cosine(&bf.doc_embedding, &bf.live_embedding).unwrap() - 1.0).abs() < 1e-12);

        let subjects = AttemptSubjects::Morph { criminal: &ids[0], accomplice: &ids[1] };
        let acc = gen_attempt(subjects, 0.3, AttemptLabel::Accomplice, &cfg, &pat, &mut rng).unwrap();
        let to_live = cosine(&acc.doc_embedding, &acc.live_embedding).unwrap();
        let to_crim = cosine(&acc.doc_embedding, &ids[0]).unwrap();
        assert!(to_live > to_crim);

        let same = AttemptSubjects::Morph { criminal: &ids[0], accomplice: &ids[0] };
        assert!(gen_attempt(same, 0.5, AttemptLabel::Criminal, &cfg, &pat, &mut rng).is_err());
    }

    #[test]
    fn benchmark_is_subject_disjoint_and_reproducible() {
        let b = gen_benchmark(&small()).unwrap();
        let sets: Vec<HashSet<&String>> = b.subjects.iter().map(|s| s.iter().collect()).collect();
        assert!(sets[0].is_disjoint(&sets[2]));
        assert!(sets[0].is_disjoint(&sets[1]));
        assert!(sets[1].is_disjoint(&sets[2]));
        for p in &b.test.entries {
            if let Some(m) = &p.morph_meta {
                assert!(sets[2].contains(&m.subject_ids.0) && sets[2].contains(&m.subject_ids.1));
            }
        }
        let again = gen_benchmark(&small()).unwrap();
        assert_eq!(b.train, again.train);
        assert_eq!(
            b.store.get(SYNTHETIC_PROVIDER, &b.test.entries[0].live_ref.key()),
            again.store.get(SYNTHETIC_PROVIDER, &again.test.entries[0].live_ref.key())
        );
    }

    #[test]
    fn each_morph_document_used_twice() {
        let b = gen_benchmark(&small()).unwrap();
        let mut uses: HashMap<&SourceRef, Vec<AttemptLabel>> = HashMap::new();
        for p in b.train.entries.iter().filter(|p| p.label.is_morph()) {
            uses.entry(&p.document_ref).or_default().push(p.label);
        }
        assert!(!uses.is_empty());
        for labels in uses.values() {
            assert_eq!(labels.len(), 2);
            assert!(labels.contains(&AttemptLabel::Criminal));
            assert!(labels.contains(&AttemptLabel::Accomplice));
        }
    }

    #[test]
    fn accomplice_pairs_more_similar_at_alpha_03() {
        for seed in 0..3 {
            let cfg = SyntheticConfig {
                alpha_set: vec![0.3],
                seed,
                ..small()
            };
            let b = gen_benchmark(&cfg).unwrap();
            for s in &b.summary.splits {
                assert!(s.mean_cosine_accomplice > s.mean_cosine_criminal);
            }
        }
    }

    #[test]
    fn artifact_channel_separates_documents() {
        let cfg = SyntheticConfig::default();
        let b = gen_benchmark(&cfg).unwrap();
        let pat = artifact_pattern(&cfg);
        let proj = |p: &AttemptPair| -> f64 {
            let v = b.store.get(SYNTHETIC_ARTIFACT, &p.document_ref.key()).unwrap();
            v.iter().zip(&pat).map(|(&a, b)| a as f64 * b).sum()
        };
        let (mut m, mut bf) = (Vec::new(), Vec::new());
        for p in &b.train.entries {
            if p.label.is_morph() { m.push(proj(p)) } else { bf.push(proj(p)) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let mu = mean(v);
            v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let se = (var(&m) / m.len() as f64 + var(&bf) / bf.len() as f64).sqrt();
        assert!((mean(&m) - mean(&bf)) > 3.0 * se);
    }

    #[test]
    fn too_few_identities() {
        let cfg = SyntheticConfig { n_identities: 6, ..Default::default() };
        assert!(gen_benchmark(&cfg).is_err());
        let cfg = SyntheticConfig { n_identities: 3, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
