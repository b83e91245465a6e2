//! Radial-basis kernel machines with calibrated probability outputs.
//!
//! Binary machines are trained with SMO and calibrated with a sigmoid fitted
//! on cross-validated decision values. Multi-class posteriors come from
//! one-vs-one machines joined by pairwise coupling.

mod platt;
mod smo;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use platt::{couple, Sigmoid};

use crate::error::{Error, Result};

/// Pairwise posteriors are clipped to this margin before coupling.
const MIN_PAIRWISE_PROB: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// RBF coefficient in `exp(-gamma * |x - y|^2)`.
    pub gamma: f64,
    /// Scale C per class by inverse class frequency.
    #[serde(default)]
    pub class_weighting: bool,
    /// Stopping tolerance on the maximal KKT violation.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Folds used to collect decision values for the calibration sigmoid.
    #[serde(default = "default_folds")]
    pub calibration_folds: usize,
}

fn default_tolerance() -> f64 {
    1e-3
}

fn default_folds() -> usize {
    5
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1e-3,
            class_weighting: false,
            tolerance: default_tolerance(),
            calibration_folds: default_folds(),
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("svm C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "svm gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("svm tolerance must be positive".into()));
        }
        if self.calibration_folds < 2 {
            return Err(Error::Config("calibration needs at least 2 folds".into()));
        }
        Ok(())
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// A trained binary machine: `f(x) = sum_i coef_i K(sv_i, x) - rho`,
/// positive for the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl BinarySvm {
    pub fn train(x: &[Vec<f64>], positive: &[bool], upper: &[f64], params: &SvmParams) -> Self {
        let n = x.len();
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            kernel[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf(params.gamma, &x[i], &x[j]);
                kernel[i * n + j] = v;
                kernel[j * n + i] = v;
            }
        }
        let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
        let sol = smo::solve(&smo::Problem {
            kernel: &kernel,
            y: &y,
            upper,
            eps: params.tolerance,
            max_iter: 10_000_000.max(100 * n),
        });
        if !sol.converged {
            log::warn!("SMO stopped after {} iterations without converging", sol.iterations);
        }
        let (mut support_vectors, mut coef) = (Vec::new(), Vec::new());
        for i in 0..n {
            if sol.alpha[i] > 0.0 {
                support_vectors.push(x[i].clone());
                coef.push(sol.alpha[i] * y[i]);
            }
        }
        Self {
            gamma: params.gamma,
            support_vectors,
            coef,
            rho: sol.rho,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(self.gamma, sv, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }
}

/// A binary machine plus the sigmoid mapping its decision value to
/// `P(positive | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSvm {
    pub svm: BinarySvm,
    pub sigmoid: Sigmoid,
}

impl CalibratedSvm {
    /// `weights` scales C per sample (class weighting); pass `None` for uniform C.
    pub fn train(
        x: &[Vec<f64>],
        positive: &[bool],
        weights: Option<&[f64]>,
        params: &SvmParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if x.len() != positive.len() {
            return Err(Error::TrainingData("feature and label counts differ".into()));
        }
        let n_pos = positive.iter().filter(|&&p| p).count();
        if n_pos == 0 || n_pos == positive.len() {
            return Err(Error::TrainingData(
                "binary training needs both classes present".into(),
            ));
        }
        let upper: Vec<f64> = match weights {
            Some(w) => w.iter().map(|w| w * params.c).collect(),
            None => vec![params.c; x.len()],
        };

        // Cross-validated decision values for the calibration sigmoid.
        let n = x.len();
        let folds = params.calibration_folds.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut decisions = vec![0.0; n];
        for f in 0..folds {
            let (start, end) = (f * n / folds, (f + 1) * n / folds);
            let held = &perm[start..end];
            let train_idx: Vec<usize> = perm[..start].iter().chain(&perm[end..]).copied().collect();
            let sub_pos: Vec<bool> = train_idx.iter().map(|&i| positive[i]).collect();
            let p = sub_pos.iter().filter(|&&v| v).count();
            if p == 0 || p == sub_pos.len() {
                let constant = if p == 0 { -1.0 } else { 1.0 };
                held.iter().for_each(|&i| decisions[i] = constant);
                continue;
            }
            let sub_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let sub_upper: Vec<f64> = train_idx.iter().map(|&i| upper[i]).collect();
            let svm = BinarySvm::train(&sub_x, &sub_pos, &sub_upper, params);
            for &i in held {
                decisions[i] = svm.decision(&x[i]);
            }
        }
        let sigmoid = Sigmoid::fit(&decisions, positive);
        let svm = BinarySvm::train(x, positive, &upper, params);
        Ok(Self { svm, sigmoid })
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        self.sigmoid.predict(self.svm.decision(x))
    }
}

/// Inverse-frequency weights `n / (k * n_c)` for class indices in `0..k`.
pub fn balanced_weights(classes: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &c in classes {
        counts[c] += 1;
    }
    let n = classes.len() as f64;
    classes
        .iter()
        .map(|&c| n / (k as f64 * counts[c] as f64))
        .collect()
}

/// One calibrated machine per class pair; `probabilities` couples them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsOne {
    pub n_classes: usize,
    /// `(i, j, machine)` with class `i` as the positive side, `i < j`.
    pub machines: Vec<(usize, usize, CalibratedSvm)>,
}

impl OneVsOne {
    pub fn train(x: &[Vec<f64>], classes: &[usize], k: usize, params: &SvmParams, seed: u64) -> Result<Self> {
        for c in 0..k {
            if !classes.contains(&c) {
                return Err(Error::TrainingData(format!("class {c} has no training examples")));
            }
        }
        let weights = params.class_weighting.then(|| balanced_weights(classes, k));
        let mut machines = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                let idx: Vec<usize> = (0..x.len())
                    .filter(|&t| classes[t] == i || classes[t] == j)
                    .collect();
                let sub_x: Vec<Vec<f64>> = idx.iter().map(|&t| x[t].clone()).collect();
                let pos: Vec<bool> = idx.iter().map(|&t| classes[t] == i).collect();
                let w: Option<Vec<f64>> = weights.as_ref().map(|w| idx.iter().map(|&t| w[t]).collect());
                let pair_seed = seed.wrapping_add((i * k + j) as u64);
                let m = CalibratedSvm::train(&sub_x, &pos, w.as_deref(), params, pair_seed)?;
                machines.push((i, j, m));
            }
        }
        Ok(Self { n_classes: k, machines })
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_classes;
        let mut r = vec![vec![0.0; k]; k];
        for (i, j, m) in &self.machines {
            let p = m.probability(x).clamp(MIN_PAIRWISE_PROB, 1.0 - MIN_PAIRWISE_PROB);
            r[*i][*j] = p;
            r[*j][*i] = 1.0 - p;
        }
        couple(&r)
    }
}
