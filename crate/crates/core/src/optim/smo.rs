//! Two-coordinate (SMO) solver for the linear SVM dual with bias,
//!
//! ```text
//! min_α ½ αᵀQα − Σ α_k   s.t.  Σ α_k y_k = 0,  0 ≤ α ≤ C,
//! ```
//!
//! `Q_ij = y_i y_j x_i·x_j`, using second-order working-set selection.
//! Kernel entries are formed on the fly from the primal `w`, which the
//! linear kernel lets us keep explicitly.

use super::dcd::{DenseRows, RowSet};

const TAU: f64 = 1e-12;

pub(crate) struct SmoResult {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation `m(α) − M(α)` at termination.
    pub violation: f64,
    pub converged: bool,
}

/// Runs SMO from a feasible starting `alpha` (box and equality).
pub(crate) fn solve(
    x: &DenseRows,
    y: &[f64],
    cost: f64,
    mut alpha: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> SmoResult {
    let n = x.n_rows();
    let d = x.dim();
    let qd: Vec<f64> = (0..n).map(|i| x.sq_norm(i)).collect();
    let mut w = vec![0.0; d];
    for i in 0..n {
        if alpha[i] != 0.0 {
            x.axpy(i, alpha[i] * y[i], &mut w);
        }
    }
    let mut grad: Vec<f64> = (0..n).map(|k| y[k] * x.dot(k, &w) - 1.0).collect();
    let mut kernel_i = vec![0.0; n];
    let mut dw = vec![0.0; d];

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = if y[t] > 0.0 {
                alpha[t] < cost
            } else {
                alpha[t] > 0.0
            };
            if up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            violation = 0.0;
            converged = true;
            break;
        }
        let xi = x.row(i);
        for t in 0..n {
            kernel_i[t] = x.dot(t, xi);
        }
        // j: second-order choice in I_low; gmax2 tracks −M(α)
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 {
                alpha[t] > 0.0
            } else {
                alpha[t] < cost
            };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = qd[i] + qd[t] - 2.0 * kernel_i[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        violation = gmax + gmax2;
        if violation <= tol || j == usize::MAX {
            converged = violation <= tol;
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * kernel_i[j];
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            let (mut ni, mut nj) = (ai + delta, aj + delta);
            if diff > 0.0 {
                if nj < 0.0 {
                    nj = 0.0;
                    ni = diff;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 {
                if ni > cost {
                    ni = cost;
                    nj = cost - diff;
                }
            } else if nj > cost {
                nj = cost;
                ni = cost + diff;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            let (mut ni, mut nj) = (ai - delta, aj + delta);
            if sum > cost {
                if ni > cost {
                    ni = cost;
                    nj = sum - cost;
                }
            } else if nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > cost {
                if nj > cost {
                    nj = cost;
                    ni = sum - cost;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        }

        let di = (alpha[i] - ai) * y[i];
        let dj = (alpha[j] - aj) * y[j];
        for (k, v) in dw.iter_mut().enumerate() {
            *v = di * xi[k] + dj * x.row(j)[k];
        }
        for (wk, v) in w.iter_mut().zip(&dw) {
            *wk += v;
        }
        for t in 0..n {
            grad[t] += y[t] * x.dot(t, &dw);
        }
    }

    SmoResult {
        bias: bias_from_gradient(&alpha, &grad, y, cost),
        weights: w,
        iterations,
        violation,
        converged,
    }
}

/// Offset from the KKT conditions: the mean of `−y G` over free
/// multipliers, or the midpoint of the feasible interval when none is free.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], cost: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for k in 0..alpha.len() {
        let yg = y[k] * grad[k];
        if alpha[k] >= cost {
            if y[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if y[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    -rho
}

/// Rescales the larger class's multipliers so that `Σ α_k y_k = 0`.
pub(crate) fn balance(alpha: &mut [f64], y: &[f64]) {
    let pos: f64 = alpha
        .iter()
        .zip(y)
        .filter(|(_, s)| **s > 0.0)
        .map(|(a, _)| a)
        .sum();
    let neg: f64 = alpha
        .iter()
        .zip(y)
        .filter(|(_, s)| **s < 0.0)
        .map(|(a, _)| a)
        .sum();
    if pos == 0.0 || neg == 0.0 {
        alpha.iter_mut().for_each(|a| *a = 0.0);
        return;
    }
    let (shrink_pos, factor) = if pos > neg {
        (true, neg / pos)
    } else {
        (false, pos / neg)
    };
    for (a, s) in alpha.iter_mut().zip(y) {
        if (*s > 0.0) == shrink_pos {
            *a *= factor;
        }
    }
}
