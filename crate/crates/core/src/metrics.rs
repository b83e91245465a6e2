//! Biometric error rates over a threshold sweep.
//!
//! Scores follow the "higher means more likely morphed" convention. A pair is
//! flagged as a morph at threshold `tau` when its score is strictly greater
//! than `tau`, so both error functions are step functions that only change at
//! observed scores. The candidate threshold grid is therefore the set of
//! distinct observed scores plus a `-inf` sentinel (`+inf` coincides with the
//! largest observed score).

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating-point weights of the weighted average error, in the order
/// `[EER, B_0.1, B_0.05, B_0.01]`.
pub const WAE_WEIGHTS: [f64; 4] = [0.3, 0.1, 0.2, 0.4];

/// APCER limits of the reported `B_x` operating points.
pub const OPERATING_APCERS: [f64; 3] = [0.1, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub bona_fide: Vec<f64>,
    pub morph: Vec<f64>,
}

impl ScoreSet {
    pub fn new(bona_fide: Vec<f64>, morph: Vec<f64>) -> Result<Self> {
        if bona_fide.is_empty() || morph.is_empty() {
            return Err(Error::EmptyScores);
        }
        if bona_fide.iter().chain(&morph).any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite score".into()));
        }
        Ok(Self { bona_fide, morph })
    }

    /// Reads a `score,is_morph` CSV. `is_morph` accepts 0/1 or true/false.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            score: f64,
            is_morph: String,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (mut bona_fide, mut morph) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: Row = row?;
            match row.is_morph.to_ascii_lowercase().as_str() {
                "1" | "true" => morph.push(row.score),
                "0" | "false" => bona_fide.push(row.score),
                other => return Err(Error::InvalidInput(format!("bad is_morph value `{other}`"))),
            }
        }
        Self::new(bona_fide, morph)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f)
    }
}

fn step(x: f64) -> usize {
    usize::from(x > 0.0)
}

/// Fraction of bona fide scores strictly above `tau`.
pub fn bpcer(bona_fide: &[f64], tau: f64) -> Result<f64> {
    if bona_fide.is_empty() {
        return Err(Error::EmptyScores);
    }
    let flagged: usize = bona_fide.iter().map(|&b| step(b - tau)).sum();
    Ok(flagged as f64 / bona_fide.len() as f64)
}

/// Fraction of morph scores not strictly above `tau`.
pub fn apcer(morph: &[f64], tau: f64) -> Result<f64> {
    if morph.is_empty() {
        return Err(Error::EmptyScores);
    }
    // Counting misses directly keeps exact fractions such as 1/20 equal to
    // the decimal limits they are compared against.
    let missed: usize = morph.iter().map(|&m| 1 - step(m - tau)).sum();
    Ok(missed as f64 / morph.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

/// Error rates at every candidate threshold, in increasing threshold order.
pub fn sweep(s: &ScoreSet) -> Vec<OperatingPoint> {
    let mut b = s.bona_fide.clone();
    let mut m = s.morph.clone();
    b.sort_by(f64::total_cmp);
    m.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = b.iter().chain(&m).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let (n, mm) = (b.len(), m.len());
    let mut points = Vec::with_capacity(grid.len() + 1);
    points.push(OperatingPoint {
        threshold: f64::NEG_INFINITY,
        apcer: 0.0,
        bpcer: 1.0,
    });
    let (mut bi, mut mi) = (0, 0);
    for tau in grid {
        while bi < n && b[bi] <= tau {
            bi += 1;
        }
        while mi < mm && m[mi] <= tau {
            mi += 1;
        }
        points.push(OperatingPoint {
            threshold: tau,
            apcer: mi as f64 / mm as f64,
            bpcer: (n - bi) as f64 / n as f64,
        });
    }
    points
}

/// Equal error rate on the discrete threshold grid: the mean of BPCER and
/// APCER at the threshold minimizing their absolute difference (lowest such
/// threshold on ties).
pub fn eer(s: &ScoreSet) -> f64 {
    eer_from_sweep(&sweep(s))
}

/// Gaps below this are ties. Distinct gaps differ by at least
/// `1 / (N * M)`, so rounding noise cannot decide which threshold wins.
const TIE_TOLERANCE: f64 = 1e-12;

pub fn eer_from_sweep(points: &[OperatingPoint]) -> f64 {
    let mut best = &points[0];
    for p in &points[1..] {
        if (p.bpcer - p.apcer).abs() < (best.bpcer - best.apcer).abs() - TIE_TOLERANCE {
            best = p;
        }
    }
    (best.bpcer + best.apcer) / 2.0
}

/// Equal error rate by linear interpolation between the two grid thresholds
/// where `BPCER - APCER` changes sign.
pub fn eer_interpolated(s: &ScoreSet) -> f64 {
    let points = sweep(s);
    for w in points.windows(2) {
        let d0 = w[0].bpcer - w[0].apcer;
        let d1 = w[1].bpcer - w[1].apcer;
        if d1 <= 0.0 {
            if d0 == d1 {
                return w[1].bpcer;
            }
            let t = d0 / (d0 - d1);
            return w[0].bpcer + t * (w[1].bpcer - w[0].bpcer);
        }
    }
    // Unreachable for non-empty sets: at the top threshold BPCER is 0 and APCER is 1.
    eer_from_sweep(&points)
}

/// Lowest BPCER over thresholds whose APCER does not exceed `max_apcer`
/// (`B_x` with `x = max_apcer`). Returns 1.0 when no threshold qualifies.
pub fn bpcer_at_apcer(s: &ScoreSet, max_apcer: f64) -> Result<f64> {
    if !(max_apcer > 0.0 && max_apcer < 1.0) {
        return Err(Error::InvalidInput(format!(
            "APCER limit must lie in (0, 1), got {max_apcer}"
        )));
    }
    Ok(bpcer_at_apcer_from_sweep(&sweep(s), max_apcer))
}

pub fn bpcer_at_apcer_from_sweep(points: &[OperatingPoint], max_apcer: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.apcer <= max_apcer)
        .map(|p| p.bpcer)
        .fold(1.0, f64::min)
}

/// Weighted average error over `[EER, B_0.1, B_0.05, B_0.01]`.
pub fn wae(errors: [f64; 4]) -> Result<f64> {
    if let Some(e) = errors.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::InvalidInput(format!("error rate {e} outside [0, 1]")));
    }
    Ok(WAE_WEIGHTS
        .iter()
        .zip(errors)
        .map(|(w, e)| w * e)
        .fold(0.0, |acc, x| acc + x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub eer: f64,
    pub b_010: f64,
    pub b_005: f64,
    pub b_001: f64,
    pub wae: f64,
}

impl ErrorSummary {
    pub fn compute(s: &ScoreSet) -> Self {
        let points = sweep(s);
        let eer = eer_from_sweep(&points);
        let [b_010, b_005, b_001] =
            OPERATING_APCERS.map(|x| bpcer_at_apcer_from_sweep(&points, x));
        // All inputs are rates in [0, 1] by construction.
        let wae = wae([eer, b_010, b_005, b_001]).expect("rates within [0, 1]");
        Self {
            eer,
            b_010,
            b_005,
            b_001,
            wae,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

/// (APCER, BPCER) at every candidate threshold, sorted by APCER with
/// BPCER non-increasing along the curve, repeated points collapsed.
pub fn det_curve(s: &ScoreSet) -> DetCurve {
    // Increasing thresholds already give non-decreasing APCER and
    // non-increasing BPCER, so the sweep order is the curve order.
    let mut points: Vec<DetPoint> = sweep(s)
        .into_iter()
        .map(|p| DetPoint {
            apcer: p.apcer,
            bpcer: p.bpcer,
        })
        .collect();
    points.dedup();
    DetCurve { points }
}

impl DetCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("apcer,bpcer\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.apcer, p.bpcer));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(b: &[f64], m: &[f64]) -> ScoreSet {
        ScoreSet::new(b.to_vec(), m.to_vec()).unwrap()
    }

    #[test]
    fn bpcer_examples() {
        assert_eq!(bpcer(&[0.1, 0.9], 0.5).unwrap(), 0.5);
        assert_eq!(bpcer(&[0.1, 0.9, 3.0], f64::INFINITY).unwrap(), 0.0);
        assert_eq!(bpcer(&[0.5], 0.5).unwrap(), 0.0);
        assert!(bpcer(&[], 0.5).is_err());
    }

    #[test]
    fn apcer_examples() {
        assert_eq!(apcer(&[0.2, 0.8], 0.5).unwrap(), 0.5);
        assert_eq!(apcer(&[0.1, 0.4, 0.7], 0.0).unwrap(), 0.0);
        assert_eq!(apcer(&[0.5], 0.5).unwrap(), 1.0);
        assert!(apcer(&[], 0.5).is_err());
    }

    #[test]
    fn eer_examples() {
        assert_eq!(eer(&set(&[0.1, 0.2], &[0.8, 0.9])), 0.0);
        assert_eq!(eer(&set(&[0.1, 0.9], &[0.2, 0.8])), 0.5);
        assert_eq!(eer(&set(&[0.8], &[0.2])), 1.0);
    }

    #[test]
    fn exact_ties_go_to_the_lowest_threshold() {
        // At 0.0 the gap is |1 - 1/3|, at 2.0 it is |0 - 2/3|: a tie that
        // floating-point rounding alone would break the other way.
        assert_eq!(eer(&set(&[2.0], &[0.0, 3.0, 2.0])), (1.0 + 1.0 / 3.0) / 2.0);
    }

    #[test]
    fn apcer_limit_is_met_exactly() {
        // One miss in twenty is exactly 5%.
        let morph: Vec<f64> = (0..20).map(|i| if i == 0 { 0.1 } else { 0.9 }).collect();
        assert_eq!(apcer(&morph, 0.5).unwrap(), 0.05);
        assert_eq!(bpcer_at_apcer(&set(&[0.2, 0.3], &morph), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn interpolated_eer_brackets_discrete() {
        let s = set(&[0.1, 0.3, 0.35, 0.6], &[0.2, 0.5, 0.7, 0.9, 0.95]);
        let e = eer_interpolated(&s);
        assert!((0.0..=1.0).contains(&e));
        assert_eq!(eer_interpolated(&set(&[0.1, 0.2], &[0.8, 0.9])), 0.0);
    }

    #[test]
    fn bpcer_at_apcer_examples() {
        assert_eq!(bpcer_at_apcer(&set(&[0.1, 0.2], &[0.8, 0.9]), 0.05).unwrap(), 0.0);
        assert_eq!(bpcer_at_apcer(&set(&[0.1, 0.9], &[0.2, 0.8]), 0.5).unwrap(), 0.5);
        assert_eq!(bpcer_at_apcer(&set(&[0.6], &[0.4]), 0.01).unwrap(), 1.0);
        assert!(bpcer_at_apcer(&set(&[0.6], &[0.4]), 1.0).is_err());
    }

    #[test]
    fn wae_examples() {
        assert_eq!(wae([0.0; 4]).unwrap(), 0.0);
        assert_eq!(wae([1.0; 4]).unwrap(), 1.0);
        assert_eq!(wae([0.1, 0.2, 0.3, 0.4]).unwrap(), 0.27);
        assert!(wae([0.1, 1.2, 0.3, 0.4]).is_err());
    }

    #[test]
    fn det_curve_examples() {
        let s = set(&[0.1, 0.2, 0.3], &[0.7, 0.8]);
        let c = det_curve(&s);
        assert!(c.points.iter().any(|p| p.apcer == 0.0 && p.bpcer == 0.0));
        assert!(c.points.len() <= 3 + 2 + 1);
        for w in c.points.windows(2) {
            assert!(w[0].apcer <= w[1].apcer);
            assert!(w[0].bpcer >= w[1].bpcer);
        }
    }

    #[test]
    fn reads_score_csv() {
        let csv = "score,is_morph\n0.1,0\n0.9,1\n0.4,true\n";
        let s = ScoreSet::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(s.bona_fide, vec![0.1]);
        assert_eq!(s.morph, vec![0.9, 0.4]);
        assert!(ScoreSet::from_csv_reader("score,is_morph\n0.1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_matches_components() {
        let s = set(&[0.1, 0.4, 0.35, 0.8], &[0.3, 0.6, 0.9]);
        let e = ErrorSummary::compute(&s);
        assert_eq!(e.eer, eer(&s));
        assert_eq!(e.b_005, bpcer_at_apcer(&s, 0.05).unwrap());
        assert_eq!(e.wae, wae([e.eer, e.b_010, e.b_005, e.b_001]).unwrap());
    }
}
