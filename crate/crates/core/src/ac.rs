//! Attempt classification: from the similarity of the document and live
//! embeddings, estimate whether the live subject is the accomplice, the
//! genuine holder or the criminal.

use serde::{Deserialize, Serialize};

use crate::domain::AttemptLabel;
use crate::error::{Error, Result};
use crate::svm::{OneVsOne, SvmParams};

/// Tolerance on the probability triple summing to one.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// Posterior over attempt types, in (accomplice, bona fide, criminal) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttemptProbabilities {
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
}

impl AttemptProbabilities {
    pub fn new(p_a: f64, p_b: f64, p_c: f64) -> Result<Self> {
        let p = Self { p_a, p_b, p_c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.as_array();
        if v.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(format!("probabilities {v:?} outside [0, 1]")));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities {v:?} sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn one_hot(label: AttemptLabel) -> Self {
        let mut v = [0.0; 3];
        v[label.class_index()] = 1.0;
        Self::from_array(v)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_a, self.p_b, self.p_c]
    }

    fn from_array(v: [f64; 3]) -> Self {
        Self {
            p_a: v[0],
            p_b: v[1],
            p_c: v[2],
        }
    }

    pub fn max(&self) -> f64 {
        self.p_a.max(self.p_b).max(self.p_c)
    }

    /// Most probable attempt type; ties resolve to bona fide, then criminal.
    pub fn predicted(&self) -> AttemptLabel {
        let m = self.max();
        if self.p_b == m {
            AttemptLabel::BonaFide
        } else if self.p_c == m {
            AttemptLabel::Criminal
        } else {
            AttemptLabel::Accomplice
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcInput {
    /// The cosine similarity scalar alone.
    #[default]
    Cosine,
    /// Cosine similarity followed by the raw `doc - live` difference.
    CosineAndDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcParams {
    pub c: f64,
    pub gamma: f64,
    pub class_weighting: bool,
    pub input: AcInput,
    /// Multiplier applied to every feature before the kernel. Cosines live in
    /// `[-1, 1]`; without rescaling a small `gamma` makes the kernel nearly
    /// constant and the per-pair machines collapse to the majority class.
    pub input_scale: f64,
}

impl Default for AcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1e-3,
            class_weighting: false,
            input: AcInput::Cosine,
            input_scale: 100.0,
        }
    }
}

impl AcParams {
    pub fn svm(&self) -> SvmParams {
        SvmParams {
            c: self.c,
            gamma: self.gamma,
            class_weighting: self.class_weighting,
            ..SvmParams::default()
        }
    }
}

/// One training or inference input of the attempt classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct AcSample {
    pub cosine: f64,
    /// `doc - live`; only read when the model uses [`AcInput::CosineAndDifference`].
    pub difference: Option<Vec<f64>>,
}

impl AcSample {
    pub fn cosine(cosine: f64) -> Self {
        Self {
            cosine,
            difference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcModel {
    pub input: AcInput,
    pub params: AcParams,
    pub classifier: OneVsOne,
}

fn check_cosine(c: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::InvalidInput(format!("cosine {c} outside [-1, 1]")));
    }
    Ok(())
}

fn features(params: &AcParams, s: &AcSample) -> Result<Vec<f64>> {
    let mut v = raw_features(params.input, s)?;
    v.iter_mut().for_each(|x| *x *= params.input_scale);
    Ok(v)
}

fn raw_features(input: AcInput, s: &AcSample) -> Result<Vec<f64>> {
    check_cosine(s.cosine)?;
    match input {
        AcInput::Cosine => Ok(vec![s.cosine]),
        AcInput::CosineAndDifference => {
            let diff = s.difference.as_ref().ok_or_else(|| {
                Error::InvalidInput("attempt classifier needs the difference vector".into())
            })?;
            let mut v = Vec::with_capacity(diff.len() + 1);
            v.push(s.cosine);
            v.extend_from_slice(diff);
            Ok(v)
        }
    }
}

pub fn train_ac(samples: &[(AcSample, AttemptLabel)], params: &AcParams, seed: u64) -> Result<AcModel> {
    for label in AttemptLabel::ALL {
        if !samples.iter().any(|(_, l)| *l == label) {
            return Err(Error::TrainingData(format!(
                "attempt classifier has no {label} training examples"
            )));
        }
    }
    if !(params.input_scale > 0.0 && params.input_scale.is_finite()) {
        return Err(Error::Config(format!(
            "ac.input_scale must be positive, got {}",
            params.input_scale
        )));
    }
    let x = samples
        .iter()
        .map(|(s, _)| features(params, s))
        .collect::<Result<Vec<_>>>()?;
    let classes: Vec<usize> = samples.iter().map(|(_, l)| l.class_index()).collect();
    let classifier = OneVsOne::train(&x, &classes, 3, &params.svm(), seed)?;
    Ok(AcModel {
        input: params.input,
        params: *params,
        classifier,
    })
}

impl AcModel {
    pub fn classify(&self, sample: &AcSample) -> Result<AttemptProbabilities> {
        let x = features(&self.params, sample)?;
        let p = self.classifier.probabilities(&x);
        AttemptProbabilities::new(p[0], p[1], p[2])
    }
}

/// Posterior over attempt types for a cosine-only model.
pub fn classify_attempt(model: &AcModel, cosine: f64) -> Result<AttemptProbabilities> {
    model.classify(&AcSample::cosine(cosine))
}

/// Row-major 3x3 confusion matrix (true class by predicted class) in
/// (accomplice, bona fide, criminal) order, with accuracy and macro F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub matrix: [[usize; 3]; 3],
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl ConfusionSummary {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (AttemptLabel, AttemptLabel)>) -> Self {
        let mut matrix = [[0usize; 3]; 3];
        for (truth, pred) in pairs {
            matrix[truth.class_index()][pred.class_index()] += 1;
        }
        let total: usize = matrix.iter().flatten().sum();
        let correct: usize = (0..3).map(|i| matrix[i][i]).sum();
        let f1s: Vec<f64> = (0..3)
            .map(|k| {
                let tp = matrix[k][k] as f64;
                let predicted: usize = (0..3).map(|i| matrix[i][k]).sum();
                let actual: usize = matrix[k].iter().sum();
                if predicted + actual == 0 {
                    0.0
                } else {
                    2.0 * tp / (predicted + actual) as f64
                }
            })
            .collect();
        Self {
            matrix,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            macro_f1: f1s.iter().sum::<f64>() / 3.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Bona fide near 0.95, criminal near 0.3, accomplice near 0.7, sd 0.02.
    fn separable(n_per_class: usize, seed: u64) -> Vec<(AcSample, AttemptLabel)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for _ in 0..n_per_class {
            for (label, mu) in [
                (AttemptLabel::BonaFide, 0.95),
                (AttemptLabel::Criminal, 0.3),
                (AttemptLabel::Accomplice, 0.7),
            ] {
                let c: f64 = Normal::new(mu, 0.02).unwrap().sample(&mut rng);
                out.push((AcSample::cosine(c.clamp(-1.0, 1.0)), label));
            }
        }
        out
    }

    /// Nearest-class-mean baseline used as an independent reference.
    fn nearest_mean_accuracy(train: &[(AcSample, AttemptLabel)], test: &[(AcSample, AttemptLabel)]) -> f64 {
        let mean = |l: AttemptLabel| {
            let v: Vec<f64> = train.iter().filter(|s| s.1 == l).map(|s| s.0.cosine).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let means: Vec<(AttemptLabel, f64)> = AttemptLabel::ALL.iter().map(|&l| (l, mean(l))).collect();
        let ok = test
            .iter()
            .filter(|(s, l)| {
                let best = means
                    .iter()
                    .min_by(|a, b| (a.1 - s.cosine).abs().total_cmp(&(b.1 - s.cosine).abs()))
                    .unwrap();
                best.0 == *l
            })
            .count();
        ok as f64 / test.len() as f64
    }

    #[test]
    fn separable_set_is_learned() {
        let train = separable(60, 1);
        let test = separable(100, 2);
        assert!(nearest_mean_accuracy(&train, &test) >= 0.95);
        let model = train_ac(&train, &AcParams::default(), 9).unwrap();
        let correct = test
            .iter()
            .filter(|(s, l)| model.classify(s).unwrap().predicted() == *l)
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
        assert_eq!(classify_attempt(&model, 0.95).unwrap().predicted(), AttemptLabel::BonaFide);
        assert_eq!(classify_attempt(&model, 0.30).unwrap().predicted(), AttemptLabel::Criminal);
    }

    #[test]
    fn probabilities_form_a_distribution_and_are_pure() {
        let model = train_ac(&separable(30, 3), &AcParams::default(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c: f64 = rng.random_range(-1.0..=1.0);
            let p = classify_attempt(&model, c).unwrap();
            let sum = p.p_a + p.p_b + p.p_c;
            assert!((sum - 1.0).abs() <= 1e-9);
            assert_eq!(p, classify_attempt(&model, c).unwrap());
        }
        assert!(classify_attempt(&model, 1.5).is_err());
    }

    #[test]
    fn missing_class_is_an_error() {
        let data: Vec<_> = separable(10, 4)
            .into_iter()
            .filter(|(_, l)| *l != AttemptLabel::Accomplice)
            .collect();
        assert!(matches!(
            train_ac(&data, &AcParams::default(), 0),
            Err(Error::TrainingData(_))
        ));
    }

    #[test]
    fn difference_input_mode() {
        let params = AcParams {
            input: AcInput::CosineAndDifference,
            ..Default::default()
        };
        let data: Vec<_> = separable(10, 6)
            .into_iter()
            .map(|(s, l)| {
                let d = vec![1.0 - s.cosine, 0.0];
                (AcSample { cosine: s.cosine, difference: Some(d) }, l)
            })
            .collect();
        let m = train_ac(&data, &params, 0).unwrap();
        assert!(m.classify(&AcSample::cosine(0.9)).is_err());
        assert!(m.classify(&AcSample { cosine: 0.9, difference: Some(vec![0.1, 0.0]) }).is_ok());
    }

    #[test]
    fn confusion_summary() {
        use AttemptLabel::*;
        let s = ConfusionSummary::from_pairs([
            (BonaFide, BonaFide),
            (BonaFide, Accomplice),
            (Criminal, Criminal),
            (Accomplice, Accomplice),
        ]);
        assert_eq!(s.accuracy, 0.75);
        assert_eq!(s.matrix[1][0], 1);
    }

    #[test]
    fn one_hot_and_validation() {
        let p = AttemptProbabilities::one_hot(AttemptLabel::Criminal);
        assert_eq!(p.as_array(), [0.0, 0.0, 1.0]);
        assert!(AttemptProbabilities::new(0.5, 0.5, 0.5).is_err());
        assert_eq!(AttemptProbabilities::new(0.4, 0.4, 0.2).unwrap().predicted(), AttemptLabel::BonaFide);
    }
}
