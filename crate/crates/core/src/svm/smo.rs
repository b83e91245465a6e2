//! Sequential minimal optimization for the C-SVC dual with second-order
//! working-set selection.

const TAU: f64 = 1e-12;

pub(crate) struct Problem<'a> {
    /// Precomputed kernel matrix, row-major `n x n`.
    pub kernel: &'a [f64],
    /// Labels in {-1, +1}.
    pub y: &'a [f64],
    /// Per-sample box bound.
    pub upper: &'a [f64],
    pub eps: f64,
    pub max_iter: usize,
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn solve(p: &Problem<'_>) -> Solution {
    let n = p.y.len();
    let k = |i: usize, j: usize| p.kernel[i * n + j];
    let q = |i: usize, j: usize| p.y[i] * p.y[j] * k(i, j);
    let qd: Vec<f64> = (0..n).map(|i| k(i, i)).collect();

    let mut alpha = vec![0.0; n];
    // Gradient of 0.5 a'Qa - e'a at a = 0.
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64, i: usize| a >= p.upper[i];
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < p.max_iter {
        // i: maximal violating index from I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -p.y[t] * grad[t];
            let in_up = if p.y[t] > 0.0 {
                !at_upper(alpha[t], t)
            } else {
                !at_lower(alpha[t])
            };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        // j: second-order choice from I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if p.y[t] > 0.0 {
                    !at_lower(alpha[t])
                } else {
                    !at_upper(alpha[t], t)
                };
                if !in_low {
                    continue;
                }
                let v = p.y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let quad = qd[i] + qd[t] - 2.0 * k(i, t);
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < p.eps {
            converged = true;
            break;
        }
        iterations += 1;

        let (ci, cj) = (p.upper[i], p.upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if p.y[i] != p.y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = p.y[t] * grad[t];
        if at_upper(alpha[t], t) {
            if p.y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if p.y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
        converged,
    }
}
