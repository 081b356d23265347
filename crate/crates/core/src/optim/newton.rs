//! Primal Newton solver for margin SVMs with few variables and many rows.
//!
//! The hinge is replaced by a Huber-smoothed hinge of width μ, whose
//! minimizer is found by damped Newton steps; μ then shrinks tenfold per
//! stage. The smoothed optimum yields feasible dual multipliers, so every
//! stage ends with a duality-gap certificate for the exact problem. Unlike
//! coordinate descent on the dual, progress does not depend on how close
//! to parallel the rows are.

use nalgebra::{DMatrix, DVector};

use super::dcd::RowSet;

const GAP_FLOOR: f64 = 1e-10;

pub(crate) struct NewtonFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Relative duality gap of the returned point.
    pub gap: f64,
    pub converged: bool,
}

struct Problem {
    n: usize,
    /// Row-major `rows × n`.
    a: Vec<f64>,
    m: Vec<f64>,
    cost: f64,
}

impl Problem {
    fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.n..(r + 1) * self.n]
    }

    fn rows(&self) -> usize {
        self.m.len()
    }

    fn slacks(&self, u: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|r| self.m[r] - dot(self.row(r), u))
            .collect()
    }

    /// Smoothed objective at `u` given its slacks.
    fn smoothed(&self, u: &[f64], z: &[f64], mu: f64) -> f64 {
        let loss: f64 = z.iter().map(|&z| huber(z, mu)).sum();
        0.5 * dot(u, u) + self.cost * loss
    }

    fn primal(&self, u: &[f64]) -> f64 {
        let loss: f64 = self.slacks(u).iter().map(|z| z.max(0.0)).sum();
        0.5 * dot(u, u) + self.cost * loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn huber(z: f64, mu: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z < mu {
        z * z / (2.0 * mu)
    } else {
        z - 0.5 * mu
    }
}

/// Derivative of the smoothed hinge, which doubles as the multiplier
/// `α / C` it implies.
fn huber_slope(z: f64, mu: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z < mu {
        z / mu
    } else {
        1.0
    }
}

fn piece(z: f64, mu: f64) -> u8 {
    if z <= 0.0 {
        0
    } else if z < mu {
        1
    } else {
        2
    }
}

/// Solves `min_w ½‖w‖² + cost Σ_r max(0, targets_r − x_r·w)`.
pub(crate) fn solve<R: RowSet>(rows: &R, targets: &[f64], cost: f64, tol: f64, max_iter: usize) -> NewtonFit {
    let n = rows.dim();
    let mut a = vec![0.0; rows.n_rows() * n];
    for r in 0..rows.n_rows() {
        rows.axpy(r, 1.0, &mut a[r * n..(r + 1) * n]);
    }
    let p = Problem {
        n,
        a,
        m: targets.to_vec(),
        cost,
    };
    let scale = 1.0 + targets.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    let mut mu = scale;
    let mut u = vec![0.0; n];
    let mut iterations = 0;
    // Degenerate instances (dependent rows on the margin) cannot be
    // certified much below this in double precision, even at the optimum.
    let target = (tol * tol).max(GAP_FLOOR);
    let mut best = (f64::INFINITY, u.clone());
    while iterations < max_iter {
        iterations += newton_stage(&p, &mut u, mu, max_iter - iterations);
        let gap = certificate(&p, &u, mu);
        if gap < best.0 {
            best = (gap, u.clone());
        }
        if gap <= target {
            return NewtonFit {
                weights: u,
                iterations,
                gap,
                converged: true,
            };
        }
        if let Some((v, g)) = polish(&p, &u, mu) {
            if g < best.0 {
                best = (g, v.clone());
            }
            if g <= target {
                return NewtonFit {
                    weights: v,
                    iterations,
                    gap: g,
                    converged: true,
                };
            }
        }
        if mu < 1e-18 * scale {
            break;
        }
        mu *= 0.1;
    }
    NewtonFit {
        weights: best.1,
        iterations,
        gap: best.0,
        converged: false,
    }
}

/// Relative gap between the primal at `u` and the dual at the multipliers
/// the smoothed problem assigns to `u`.
fn certificate(p: &Problem, u: &[f64], mu: f64) -> f64 {
    let alpha: Vec<f64> = p.slacks(u).iter().map(|&z| p.cost * huber_slope(z, mu)).collect();
    gap_with(p, u, &alpha)
}

/// Relative gap between the primal at `u` and the dual at `alpha`, which
/// must lie in `[0, cost]`.
fn gap_with(p: &Problem, u: &[f64], alphas: &[f64]) -> f64 {
    let mut w = vec![0.0; p.n];
    let mut lin = 0.0;
    for (r, &alpha) in alphas.iter().enumerate() {
        if alpha != 0.0 {
            lin += alpha * p.m[r];
            for (wj, x) in w.iter_mut().zip(p.row(r)) {
                *wj += alpha * x;
            }
        }
    }
    let dual = lin - 0.5 * dot(&w, &w);
    let primal = p.primal(u);
    ((primal - dual) / primal.abs().max(1.0)).max(0.0)
}

/// Solves the exact piece the smoothed solution points at: rows in the
/// quadratic band are held on the margin, rows beyond it carry full cost.
/// Margin multipliers come from a minimum-norm solve; rows whose multiplier
/// leaves `[0, cost]` or whose slack contradicts their piece are moved and
/// the piece re-solved a few times. Multipliers are clipped to the box, so
/// every returned gap is a valid certificate.
fn polish(p: &Problem, u: &[f64], mu: f64) -> Option<(Vec<f64>, f64)> {
    // 0: below the margin, 1: on it, 2: beyond it
    let mut set: Vec<u8> = p.slacks(u).iter().map(|&z| piece(z, mu)).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..8 {
        let (v, lambda) = solve_piece(p, &set)?;
        let mut alpha: Vec<f64> = set.iter().map(|&k| if k == 2 { p.cost } else { 0.0 }).collect();
        box_multipliers(p, &v, &lambda, &mut alpha);
        let gap = gap_with(p, &v, &alpha);
        let z = p.slacks(&v);
        let tiny = 1e-12 * (1.0 + p.m.iter().fold(0.0f64, |a, m| a.max(m.abs())));
        let mut changed = false;
        for &(r, l) in &lambda {
            let k = if l < 0.0 {
                0
            } else if l > p.cost {
                2
            } else {
                1
            };
            changed |= k != 1;
            set[r] = k;
        }
        for (r, k) in set.iter_mut().enumerate() {
            if (*k == 0 && z[r] > tiny) || (*k == 2 && z[r] < -tiny) {
                *k = 1;
                changed = true;
            }
        }
        if best.as_ref().is_none_or(|b| gap < b.1) {
            best = Some((v, gap));
        }
        if !changed {
            break;
        }
    }
    best
}

/// Dependent margin rows admit many multiplier vectors reproducing `v`;
/// the minimum-norm one may leave the box while another does not. Projected
/// coordinate descent on `‖Σ α_r x_r − v‖²` over the box picks a valid one.
fn box_multipliers(p: &Problem, v: &[f64], margin: &[(usize, f64)], alpha: &mut [f64]) {
    let mut resid: Vec<f64> = v.iter().map(|x| -x).collect();
    for (r, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            for (e, x) in resid.iter_mut().zip(p.row(r)) {
                *e += a * x;
            }
        }
    }
    for &(r, l) in margin {
        let a = l.clamp(0.0, p.cost);
        alpha[r] = a;
        for (e, x) in resid.iter_mut().zip(p.row(r)) {
            *e += a * x;
        }
    }
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for &(r, _) in margin {
            let x = p.row(r);
            let q = dot(x, x);
            if q == 0.0 {
                continue;
            }
            let next = (alpha[r] - dot(x, &resid) / q).clamp(0.0, p.cost);
            let d = next - alpha[r];
            if d != 0.0 {
                alpha[r] = next;
                for (e, xj) in resid.iter_mut().zip(x) {
                    *e += d * xj;
                }
                moved = moved.max(d.abs());
            }
        }
        if moved <= 1e-15 * p.cost {
            break;
        }
    }
}

/// Point and `(row, multiplier)` pairs of the margin rows.
type Piece = (Vec<f64>, Vec<(usize, f64)>);

/// Minimizer of the quadratic with rows in `set == 2` charged linearly and
/// rows in `set == 1` held at zero slack, plus the margin multipliers.
fn solve_piece(p: &Problem, set: &[u8]) -> Option<Piece> {
    let n = p.n;
    let mut g = DVector::<f64>::zeros(n);
    let mut margin = Vec::new();
    for (r, &k) in set.iter().enumerate() {
        match k {
            2 => {
                for (gj, x) in g.iter_mut().zip(p.row(r)) {
                    *gj += p.cost * x;
                }
            }
            1 => margin.push(r),
            _ => {}
        }
    }
    let mut multipliers = Vec::new();
    let v = if margin.is_empty() {
        g
    } else {
        let b = DMatrix::from_fn(margin.len(), n, |i, j| p.row(margin[i])[j]);
        let rhs = DVector::from_iterator(margin.len(), margin.iter().map(|&r| p.m[r])) - &b * &g;
        let svd = b.clone().svd(true, false);
        let (uu, sv) = (svd.u?, svd.singular_values);
        let cut = 1e-12 * sv.max();
        let proj = uu.transpose() * &rhs;
        let scaled = DVector::from_iterator(
            sv.len(),
            sv.iter()
                .zip(proj.iter())
                .map(|(&s, &q)| if s > cut { q / (s * s) } else { 0.0 }),
        );
        let lambda = uu * scaled;
        multipliers.extend(margin.iter().copied().zip(lambda.iter().copied()));
        g + b.transpose() * lambda
    };
    let v: Vec<f64> = v.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some((v, multipliers))
}

/// Damped Newton on the smoothed objective; returns iterations used.
fn newton_stage(p: &Problem, u: &mut Vec<f64>, mu: f64, budget: usize) -> usize {
    let n = p.n;
    let mut z = p.slacks(u);
    let mut f = p.smoothed(u, &z, mu);
    for it in 0..budget.min(100) {
        let mut grad = DVector::from_column_slice(u);
        let mut hess = DMatrix::<f64>::identity(n, n);
        let curvature = p.cost / mu;
        for (r, &zr) in z.iter().enumerate() {
            let s = huber_slope(zr, mu);
            if s == 0.0 {
                continue;
            }
            let x = p.row(r);
            for j in 0..n {
                grad[j] -= p.cost * s * x[j];
            }
            if s < 1.0 {
                for j in 0..n {
                    if x[j] == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        hess[(j, k)] += curvature * x[j] * x[k];
                    }
                }
            }
        }
        if grad.amax() == 0.0 {
            return it;
        }
        let Some(chol) = hess.cholesky() else {
            return it;
        };
        let step = chol.solve(&(-&grad));
        let slope = grad.dot(&step);
        if slope >= 0.0 {
            return it;
        }
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x + t * d).collect();
            let cz = p.slacks(&cand);
            let cf = p.smoothed(&cand, &cz, mu);
            if cf <= f + 1e-4 * t * slope {
                // A full step that keeps every row in its piece lands on
                // the exact minimizer of the piecewise quadratic.
                let exact = t == 1.0 && z.iter().zip(&cz).all(|(a, b)| piece(*a, mu) == piece(*b, mu));
                let tiny = step.amax() <= 1e-15 * (1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs())));
                *u = cand;
                z = cz;
                f = cf;
                if exact || tiny {
                    return it + 1;
                }
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return it + 1;
            }
        }
    }
    budget.min(100)
}
