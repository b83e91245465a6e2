//! Sigmoid calibration of decision values and pairwise coupling of binary
//! posteriors into a class distribution.

use serde::{Deserialize, Serialize};

/// `P(y = +1 | f) = 1 / (1 + exp(a * f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn predict(&self, decision: f64) -> f64 {
        let f = decision * self.a + self.b;
        if f >= 0.0 {
            (-f).exp() / (1.0 + (-f).exp())
        } else {
            1.0 / (1.0 + f.exp())
        }
    }

    /// Newton fit with backtracking line search on smoothed targets
    /// (`(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`), which keeps the parameters
    /// finite on separable data.
    pub fn fit(decisions: &[f64], positive: &[bool]) -> Self {
        // Small-gamma kernels give decision values of tiny magnitude; the
        // Newton stopping rule is absolute, so fit on standardized values and
        // map the parameters back afterwards.
        let n = decisions.len().max(1) as f64;
        let mean = decisions.iter().sum::<f64>() / n;
        let sd = (decisions.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        let standardized: Vec<f64> = decisions.iter().map(|d| (d - mean) / scale).collect();
        let s = Self::fit_standardized(&standardized, positive);
        let a = s.a / scale;
        Sigmoid { a, b: s.b - a * mean }
    }

    fn fit_standardized(decisions: &[f64], positive: &[bool]) -> Self {
        let prior1 = positive.iter().filter(|&&p| p).count() as f64;
        let prior0 = positive.len() as f64 - prior1;
        let max_iter = 100;
        let min_step = 1e-10;
        let sigma = 1e-12;
        let eps = 1e-5;
        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

        let mut a = 0.0;
        let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
        let objective = |a: f64, b: f64| -> f64 {
            decisions
                .iter()
                .zip(&t)
                .map(|(&d, &ti)| {
                    let f = d * a + b;
                    if f >= 0.0 {
                        ti * f + (1.0 + (-f).exp()).ln()
                    } else {
                        (ti - 1.0) * f + (1.0 + f.exp()).ln()
                    }
                })
                .sum()
        };
        let mut fval = objective(a, b);

        for _ in 0..max_iter {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (&d, &ti) in decisions.iter().zip(&t) {
                let f = d * a + b;
                let (p, q) = if f >= 0.0 {
                    let e = (-f).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = f.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += d * d * d2;
                h22 += d2;
                h21 += d * d2;
                let d1 = ti - p;
                g1 += d * d1;
                g2 += d1;
            }
            if g1.abs() < eps && g2.abs() < eps {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;

            let mut step = 1.0;
            let mut moved = false;
            while step >= min_step {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    moved = true;
                    break;
                }
                step /= 2.0;
            }
            if !moved {
                break;
            }
        }
        Sigmoid { a, b }
    }
}

/// Couples pairwise posteriors `r[i][j] = P(i | i or j)` into a distribution
/// over `k` classes by the fixed-point method of Wu, Lin and Weng. The result
/// is renormalized to sum to one.
pub fn couple(r: &[Vec<f64>]) -> Vec<f64> {
    let k = r.len();
    let mut q = vec![vec![0.0; k]; k];
    for t in 0..k {
        for j in 0..k {
            if j != t {
                q[t][t] += r[j][t] * r[j][t];
                q[t][j] = -r[j][t] * r[t][j];
            }
        }
    }
    let mut p = vec![1.0 / k as f64; k];
    let mut qp = vec![0.0; k];
    let max_iter = 100.max(k);
    let eps = 0.005 / k as f64;
    for _ in 0..max_iter {
        let mut pqp = 0.0;
        for t in 0..k {
            qp[t] = (0..k).map(|j| q[t][j] * p[j]).sum();
            pqp += p[t] * qp[t];
        }
        let max_error = (0..k).map(|t| (qp[t] - pqp).abs()).fold(0.0, f64::max);
        if max_error < eps {
            break;
        }
        for t in 0..k {
            let diff = (-qp[t] + pqp) / q[t][t];
            p[t] += diff;
            pqp = (pqp + diff * (diff * q[t][t] + 2.0 * qp[t])) / (1.0 + diff) / (1.0 + diff);
            for j in 0..k {
                qp[j] = (qp[j] + diff * q[t][j]) / (1.0 + diff);
                p[j] /= 1.0 + diff;
            }
        }
    }
    for v in p.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_orders_decisions() {
        let dec = [-2.0, -1.5, -1.0, -0.2, 0.3, 1.0, 1.4, 2.2];
        let pos = [false, false, false, true, false, true, true, true];
        let s = Sigmoid::fit(&dec, &pos);
        assert!(s.a < 0.0);
        assert!(s.predict(2.0) > 0.5 && s.predict(-2.0) < 0.5);
        assert!(s.predict(1.0) > s.predict(0.0));
    }

    #[test]
    fn sigmoid_stays_finite_on_separable_data() {
        let dec = [-3.0, -2.0, 2.0, 3.0];
        let pos = [false, false, true, true];
        let s = Sigmoid::fit(&dec, &pos);
        assert!(s.a.is_finite() && s.b.is_finite());
        assert!(s.predict(3.0) < 1.0);
    }

    #[test]
    fn coupling_recovers_consistent_posteriors() {
        // Pairwise posteriors generated from a known distribution.
        let truth = [0.2, 0.5, 0.3];
        let r: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| if i == j { 0.0 } else { truth[i] / (truth[i] + truth[j]) })
                    .collect()
            })
            .collect();
        let p = couple(&r);
        for (a, b) in p.iter().zip(truth) {
            assert!((a - b).abs() < 1e-3, "{p:?}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
