//! Combination of the attempt-type posterior with the two detector scores.

use serde::{Deserialize, Serialize};

use crate::ac::{AttemptProbabilities, PROBABILITY_SUM_TOLERANCE};
use crate::error::{Error, Result};

/// Outputs of the identity-artifact and identity detectors for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleScores {
    pub s_ida: f64,
    pub s_id: f64,
}

impl ModuleScores {
    pub fn new(s_ida: f64, s_id: f64) -> Result<Self> {
        let s = Self { s_ida, s_id };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s_ida", self.s_ida), ("s_id", self.s_id)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Probability-weighted sum of the detector scores.
    #[default]
    Weighted,
    /// Score of the detector associated with the most probable attempt type.
    Selection,
}

/// Which detector the bona fide probability mass is routed to under
/// weighted fusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonaFideRoute {
    #[default]
    BfToId,
    BfToIda,
}

fn check_probabilities(p: &AttemptProbabilities) -> Result<()> {
    let parts = [p.p_a, p.p_b, p.p_c];
    if parts.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput(format!("probabilities {parts:?} outside [0, 1]")));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(Error::InvalidInput(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// `S = p_A * s_ida + p_B * s_id + p_C * s_id` (bona fide mass on `s_ida`
/// instead under [`BonaFideRoute::BfToIda`]).
pub fn fuse_weighted(p: &AttemptProbabilities, scores: &ModuleScores, route: BonaFideRoute) -> Result<f64> {
    check_probabilities(p)?;
    scores.validate()?;
    let s = match route {
        BonaFideRoute::BfToId => p.p_a * scores.s_ida + (p.p_b + p.p_c) * scores.s_id,
        BonaFideRoute::BfToIda => (p.p_a + p.p_b) * scores.s_ida + p.p_c * scores.s_id,
    };
    // Rounding can push a convex combination a hair outside its endpoints.
    let (lo, hi) = (scores.s_ida.min(scores.s_id), scores.s_ida.max(scores.s_id));
    Ok(s.clamp(lo, hi))
}

/// `s_ida` when the accomplice probability is strictly the largest, `s_id`
/// otherwise (ties go to `s_id`).
///
/// Erratum: a literal form of this rule circulates that takes `s_id` when
/// `p_B` and `p_C` are both maximal and `s_ida` when `p_C` is maximal. Those
/// cases overlap and leave most inputs uncovered, so it is not implemented;
/// the artifact branch belongs to accomplice attempts, as here.
pub fn fuse_selection(p: &AttemptProbabilities, scores: &ModuleScores) -> Result<f64> {
    check_probabilities(p)?;
    scores.validate()?;
    Ok(if p.p_a > p.p_b && p.p_a > p.p_c {
        scores.s_ida
    } else {
        scores.s_id
    })
}

pub fn fuse(mode: FusionMode, route: BonaFideRoute, p: &AttemptProbabilities, scores: &ModuleScores) -> Result<f64> {
    match mode {
        FusionMode::Weighted => fuse_weighted(p, scores, route),
        FusionMode::Selection => fuse_selection(p, scores),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub bona_fide_route: BonaFideRoute,
}

/// Outcome of scoring one attempt pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub struct MADResult {
    pub pair_ref: String,
    pub probabilities: AttemptProbabilities,
    pub module_scores: ModuleScores,
    pub fused_score: f64,
    pub fusion_mode: FusionMode,
    pub routing_variant: BonaFideRoute,
    /// Cosine similarity of the two identity embeddings.
    pub cosine: f64,
}

impl MADResult {
    /// Recomputes the fused score from the stored fields.
    pub fn recompute(&self) -> Result<f64> {
        fuse(self.fusion_mode, self.routing_variant, &self.probabilities, &self.module_scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: f64, b: f64, c: f64) -> AttemptProbabilities {
        AttemptProbabilities::new(a, b, c).unwrap()
    }

    fn s(ida: f64, id: f64) -> ModuleScores {
        ModuleScores::new(ida, id).unwrap()
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(fuse_weighted(&p(1.0, 0.0, 0.0), &s(0.8, 0.4), BonaFideRoute::BfToId).unwrap(), 0.8);
        let v = fuse_weighted(&p(0.5, 0.25, 0.25), &s(0.8, 0.4), BonaFideRoute::BfToId).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        let v = fuse_weighted(&p(0.0, 0.7, 0.3), &s(0.9, 0.2), BonaFideRoute::BfToId).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        let v = fuse_weighted(&p(0.0, 0.7, 0.3), &s(0.9, 0.2), BonaFideRoute::BfToIda).unwrap();
        assert!((v - (0.7 * 0.9 + 0.3 * 0.2)).abs() < 1e-12);
    }

    #[test]
    fn selection_examples() {
        assert_eq!(fuse_selection(&p(0.6, 0.2, 0.2), &s(0.8, 0.4)).unwrap(), 0.8);
        assert_eq!(fuse_selection(&p(0.2, 0.5, 0.3), &s(0.8, 0.4)).unwrap(), 0.4);
        assert_eq!(fuse_selection(&p(0.4, 0.4, 0.2), &s(0.8, 0.4)).unwrap(), 0.4);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad = AttemptProbabilities {
            p_a: 0.5,
            p_b: 0.5,
            p_c: 0.5,
        };
        assert!(fuse_weighted(&bad, &s(0.5, 0.5), BonaFideRoute::BfToId).is_err());
        assert!(fuse_selection(&bad, &s(0.5, 0.5)).is_err());
        assert!(ModuleScores::new(1.5, 0.0).is_err());
    }

    fn triple() -> impl Strategy<Value = AttemptProbabilities> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c)| a + b + c > 1e-6)
            .prop_map(|(a, b, c)| {
                let t = a + b + c;
                let (a, b) = (a / t, b / t);
                AttemptProbabilities::new(a, b, (1.0 - a - b).max(0.0)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn weighted_collapses_to_two_terms(p in triple(), ida in 0.0..=1.0f64, id in 0.0..=1.0f64) {
            let v = fuse_weighted(&p, &s(ida, id), BonaFideRoute::BfToId).unwrap();
            prop_assert!((v - (p.p_a * ida + (1.0 - p.p_a) * id)).abs() <= 1e-12);
            prop_assert!(v >= ida.min(id) && v <= ida.max(id));
        }

        #[test]
        fn weighted_is_monotone(p in triple(), ida in 0.0..=1.0f64, id in 0.0..=1.0f64, d in 0.0..=1.0f64) {
            let base = fuse_weighted(&p, &s(ida, id), BonaFideRoute::BfToId).unwrap();
            let up_ida = fuse_weighted(&p, &s((ida + d).min(1.0), id), BonaFideRoute::BfToId).unwrap();
            let up_id = fuse_weighted(&p, &s(ida, (id + d).min(1.0)), BonaFideRoute::BfToId).unwrap();
            prop_assert!(up_ida >= base && up_id >= base);
        }

        #[test]
        fn one_hot_weighted_equals_selection(k in 0usize..3, ida in 0.0..=1.0f64, id in 0.0..=1.0f64) {
            let mut v = [0.0; 3];
            v[k] = 1.0;
            let p = AttemptProbabilities::new(v[0], v[1], v[2]).unwrap();
            prop_assert_eq!(
                fuse_weighted(&p, &s(ida, id), BonaFideRoute::BfToId).unwrap(),
                fuse_selection(&p, &s(ida, id)).unwrap()
            );
        }
    }
}
