//! Reference solvers: FISTA with adaptive restart on the dual of
//! `min_w ½‖w‖² + C Σ max(0, m_i − z_i·w)`, optionally with the equality
//! `Σ α_i y_i = 0` that an unregularized bias introduces. Termination is
//! certified by the primal/dual gap, not by the iterates.

#[derive(Debug, Clone)]
pub struct Reference {
    pub solution: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weights(z: &[Vec<f64>], alpha: &[f64], dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; dim];
    for (zi, a) in z.iter().zip(alpha) {
        for (wj, x) in w.iter_mut().zip(zi) {
            *wj += a * x;
        }
    }
    w
}

/// Largest eigenvalue of `ZᵀZ` by power iteration on the d×d Gram matrix.
fn lipschitz(z: &[Vec<f64>], dim: usize) -> f64 {
    let mut g = vec![vec![0.0; dim]; dim];
    for zi in z {
        for a in 0..dim {
            for b in 0..dim {
                g[a][b] += zi[a] * zi[b];
            }
        }
    }
    let mut v = vec![1.0; dim];
    let mut lam = 0.0;
    for _ in 0..500 {
        let gv: Vec<f64> = g.iter().map(|row| dot(row, &v)).collect();
        let norm = dot(&gv, &gv).sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        lam = norm / dot(&v, &v).sqrt();
        v = gv.iter().map(|x| x / norm).collect();
    }
    // small safety margin over the power-iteration estimate
    lam * 1.01 + 1e-12
}

/// Projection onto `{0 ≤ α ≤ C, Σ y_i α_i = 0}` by bisection on the
/// multiplier of the equality.
fn project_box_equality(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = at(mid).iter().zip(y).map(|(a, yi)| a * yi).sum();
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

struct Dual<'a> {
    z: &'a [Vec<f64>],
    m: &'a [f64],
    c: f64,
    eq: Option<&'a [f64]>,
    dim: usize,
}

impl Dual<'_> {
    fn project(&self, v: &[f64]) -> Vec<f64> {
        match self.eq {
            Some(y) => project_box_equality(v, y, self.c),
            None => v.iter().map(|x| x.clamp(0.0, self.c)).collect(),
        }
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        let w = weights(self.z, alpha, self.dim);
        dot(alpha, self.m) - 0.5 * dot(&w, &w)
    }

    /// Runs until `gap(α) ≤ tol` where `gap` is supplied by the caller.
    fn solve(&self, gap: impl Fn(&[f64]) -> f64, rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let n = self.z.len();
        let step = 1.0 / lipschitz(self.z, self.dim);
        let mut x = self.project(&vec![0.0; n]);
        let mut y = x.clone();
        let mut t = 1.0f64;
        for it in 1..=max_iter {
            let w = weights(self.z, &y, self.dim);
            // ascent on the concave dual
            let v: Vec<f64> = (0..n)
                .map(|i| y[i] + step * (self.m[i] - dot(&self.z[i], &w)))
                .collect();
            let next = self.project(&v);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let restart = (0..n).map(|i| (y[i] - next[i]) * (next[i] - x[i])).sum::<f64>() > 0.0;
            if restart {
                y = next.clone();
                t = 1.0;
            } else {
                let beta = (t - 1.0) / t_next;
                y = (0..n).map(|i| next[i] + beta * (next[i] - x[i])).collect();
                t = t_next;
            }
            x = next;
            if it % 25 == 0 {
                let d = self.value(&x);
                if gap(&x) <= rel_tol * (1.0 + d.abs()) {
                    return (x, it);
                }
            }
        }
        (x, max_iter)
    }
}

const REL_TOL: f64 = 1e-13;
const MAX_ITER: usize = 2_000_000;

fn hinge_sum(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, target: impl Fn(usize) -> f64) -> f64 {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(k, (xk, yk))| (target(k) - yk * (dot(w, xk) + b)).max(0.0))
        .sum()
}

/// `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`
pub fn svm_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    0.5 * dot(w, w) + c * hinge_sum(x, y, w, b, |_| 1.0)
}

/// Exact minimizer over `b` of the (piecewise-linear) primal for fixed `w`:
/// the optimum lies on a breakpoint `b = y_k − w·x_k`.
pub fn best_bias(x: &[Vec<f64>], y: &[f64], w: &[f64], c: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for (xk, yk) in x.iter().zip(y) {
        let b = yk - dot(w, xk);
        let obj = svm_objective(x, y, w, b, c);
        if obj < best.0 {
            best = (obj, b);
        }
    }
    best.1
}

/// Linear SVM with unregularized bias.
pub fn svm_with_bias(x: &[Vec<f64>], y: &[f64], c: f64) -> Reference {
    let dim = x[0].len();
    let z: Vec<Vec<f64>> = x
        .iter()
        .zip(y)
        .map(|(xk, yk)| xk.iter().map(|v| v * yk).collect())
        .collect();
    let m = vec![1.0; x.len()];
    let dual = Dual {
        z: &z,
        m: &m,
        c,
        eq: Some(y),
        dim,
    };
    let gap = |a: &[f64]| {
        let w = weights(&z, a, dim);
        let b = best_bias(x, y, &w, c);
        svm_objective(x, y, &w, b, c) - dual.value(a)
    };
    let (alpha, iterations) = dual.solve(gap, REL_TOL, MAX_ITER);
    let w = weights(&z, &alpha, dim);
    let b = best_bias(x, y, &w, c);
    Reference {
        objective: svm_objective(x, y, &w, b, c),
        gap: gap(&alpha),
        solution: w,
        bias: b,
        iterations,
    }
}

/// Linear SVM through the origin.
pub fn svm_no_bias(x: &[Vec<f64>], y: &[f64], c: f64) -> Reference {
    adaptive_svm(x, y, &vec![0.0; x[0].len()], 0.0, c)
}

/// `½‖ψ − c1 ψˢ‖² + c2 Σ max(0, 1 − y ψ·x)`
pub fn adaptive_objective(x: &[Vec<f64>], y: &[f64], psi: &[f64], source: &[f64], c1: f64, c2: f64) -> f64 {
    let reg: f64 = psi.iter().zip(source).map(|(p, s)| (p - c1 * s).powi(2)).sum();
    0.5 * reg + c2 * hinge_sum(x, y, psi, 0.0, |_| 1.0)
}

/// Adaptive SVM. Its Lagrangian gives `ψ = c1 ψˢ + Σ α_k y_k x_k`; the
/// dual is solved over `α ∈ [0, c2]`.
pub fn adaptive_svm(x: &[Vec<f64>], y: &[f64], source: &[f64], c1: f64, c2: f64) -> Reference {
    let dim = x[0].len();
    let z: Vec<Vec<f64>> = x
        .iter()
        .zip(y)
        .map(|(xk, yk)| xk.iter().map(|v| v * yk).collect())
        .collect();
    // dual linear term: 1 − y_k c1 ψˢ·x_k
    let m: Vec<f64> = z.iter().map(|zk| 1.0 - c1 * dot(zk, source)).collect();
    let dual = Dual {
        z: &z,
        m: &m,
        c: c2,
        eq: None,
        dim,
    };
    let psi_of = |a: &[f64]| -> Vec<f64> {
        let w = weights(&z, a, dim);
        w.iter().zip(source).map(|(wj, s)| wj + c1 * s).collect()
    };
    let gap = |a: &[f64]| adaptive_objective(x, y, &psi_of(a), source, c1, c2) - dual.value(a);
    let (alpha, iterations) = dual.solve(gap, REL_TOL, MAX_ITER);
    let psi = psi_of(&alpha);
    Reference {
        objective: adaptive_objective(x, y, &psi, source, c1, c2),
        gap: gap(&alpha),
        solution: psi,
        bias: 0.0,
        iterations,
    }
}

/// One `(path, sample)` row of the threshold QP.
#[derive(Debug, Clone)]
pub struct PathRow {
    pub ids: Vec<usize>,
    pub fixed: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub label: f64,
}

impl PathRow {
    pub fn value(&self, b: &[f64]) -> f64 {
        let s: f64 = self
            .ids
            .iter()
            .zip(&self.fixed)
            .zip(&self.weights)
            .map(|((&j, f), w)| w * (f + b[j]))
            .sum();
        self.label * (s + self.bias)
    }
}

pub fn threshold_objective(prior: &[f64], rows: &[PathRow], c: f64, b: &[f64]) -> f64 {
    let reg: f64 = b.iter().zip(prior).map(|(x, p)| (x - p).powi(2)).sum();
    0.5 * reg + c * rows.iter().map(|r| (-r.value(b)).max(0.0)).sum::<f64>()
}

/// Threshold QP `½‖B − B̃‖² + C Σ max(0, −y(W·(s + B[ids]) + b))`.
pub fn threshold_qp(prior: &[f64], rows: &[PathRow], c: f64) -> Reference {
    let n = prior.len();
    // the constraint is affine in B: value(B) = value(0) + a·B
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut a = vec![0.0; n];
            for (&j, w) in r.ids.iter().zip(&r.weights) {
                a[j] += r.label * w;
            }
            a
        })
        .collect();
    let m: Vec<f64> = rows.iter().map(|r| -r.value(prior)).collect();
    let dual = Dual {
        z: &z,
        m: &m,
        c,
        eq: None,
        dim: n,
    };
    let b_of = |a: &[f64]| -> Vec<f64> { weights(&z, a, n).iter().zip(prior).map(|(u, p)| u + p).collect() };
    let gap = |a: &[f64]| threshold_objective(prior, rows, c, &b_of(a)) - dual.value(a);
    let (alpha, iterations) = dual.solve(gap, REL_TOL, MAX_ITER);
    let b = b_of(&alpha);
    Reference {
        objective: threshold_objective(prior, rows, c, &b),
        gap: gap(&alpha),
        solution: b,
        bias: 0.0,
        iterations,
    }
}
