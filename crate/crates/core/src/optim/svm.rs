use serde::{Deserialize, Serialize};

use super::dcd::{DcdState, DenseRows, RowSet};
use super::smo;
use super::{solve_margin_svm, BiasMode, SvmConfig};
use crate::data::Label;
use crate::error::{invalid, Error, Result};

/// A linear decision function `w · x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Hyperplane {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0)
    }
}

/// A trained hyperplane plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub hyperplane: Hyperplane,
    /// Coordinate-descent epochs, summed over the bias search.
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn check_inputs(x: &DenseRows, y: &[Label]) -> Result<Vec<f64>> {
    if x.n_rows() != y.len() {
        return Err(invalid(format!("{} samples but {} labels", x.n_rows(), y.len())));
    }
    if x.dim() == 0 {
        return Err(invalid("samples have no features"));
    }
    let pos = y.iter().filter(|l| l.is_pos()).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateData(
            "SVM training needs samples of both classes".into(),
        ));
    }
    Ok(y.iter().map(|l| l.sign()).collect())
}

/// Primal objective `½‖w‖² + C Σ max(0, 1 − y (w·x + b))`.
pub fn svm_objective(x: &DenseRows, y: &[Label], h: &Hyperplane, cost: f64) -> f64 {
    let reg: f64 = h.weights.iter().map(|w| w * w).sum();
    let loss: f64 = (0..x.n_rows())
        .map(|k| (1.0 - y[k].sign() * (x.dot(k, &h.weights) + h.bias)).max(0.0))
        .sum();
    0.5 * reg + cost * loss
}

/// Primal objective of the adaptive SVM,
/// `½‖ψ − c1 ψˢ‖² + c2 Σ max(0, 1 − y ψ·x)`.
pub fn adaptive_svm_objective(
    x: &DenseRows,
    y: &[Label],
    psi: &[f64],
    source: &[f64],
    c1: f64,
    c2: f64,
) -> f64 {
    let reg: f64 = psi.iter().zip(source).map(|(p, s)| (p - c1 * s).powi(2)).sum();
    let loss: f64 = (0..x.n_rows())
        .map(|k| (1.0 - y[k].sign() * x.dot(k, psi)).max(0.0))
        .sum();
    0.5 * reg + c2 * loss
}

/// Soft-margin linear SVM with an unregularized bias, unless `cfg.bias`
/// asks for the penalized variant.
///
/// A cheap warm start comes from coordinate descent on the bias-free dual
/// while a secant search moves the bias toward `Σ α_k y_k = 0`; SMO then
/// solves the dual with the equality constraint exactly.
pub fn train_linear_svm(x: &DenseRows, y: &[Label], cfg: &SvmConfig) -> Result<SvmFit> {
    cfg.validate()?;
    let signs = check_inputs(x, y)?;
    if cfg.bias == BiasMode::Penalized {
        return Ok(train_penalized_bias(x, &signs, cfg));
    }
    let cost = cfg.reg_cost;
    let (mut alpha, epochs) = bias_search(x, &signs, cost, cfg.tol.max(1e-3), 30);
    smo::balance(&mut alpha, &signs);
    let budget = cfg.max_iter.max(1).saturating_mul(x.n_rows().max(1));
    let res = smo::solve(x, &signs, cost, alpha, cfg.tol, budget);
    Ok(SvmFit {
        hyperplane: Hyperplane::new(res.weights, res.bias),
        iterations: epochs + res.iterations,
        residual: res.violation,
        converged: res.converged,
    })
}

fn train_penalized_bias(x: &DenseRows, signs: &[f64], cfg: &SvmConfig) -> SvmFit {
    let d = x.dim();
    let mut aug = DenseRows::with_capacity(d + 1, x.n_rows());
    let mut row = vec![1.0; d + 1];
    for i in 0..x.n_rows() {
        row[..d].copy_from_slice(x.row(i));
        aug.push(&row);
    }
    let targets = vec![1.0; signs.len()];
    let mut fit = solve_margin_svm(&aug, signs, &targets, cfg.reg_cost, cfg);
    let bias = fit.weights.pop().expect("augmented weight");
    SvmFit {
        hyperplane: Hyperplane::new(fit.weights, bias),
        iterations: fit.epochs,
        residual: fit.residual,
        converged: fit.converged,
    }
}

/// Approximate multipliers for the biased SVM. `h(b) = Σ α_k(b) y_k` is the
/// negated derivative of the bias-free optimal value at bias `b` and is
/// nonincreasing; its root is the optimal bias.
fn bias_search(x: &DenseRows, signs: &[f64], cost: f64, tol: f64, max_probes: usize) -> (Vec<f64>, usize) {
    let mut state = DcdState::new(x, signs, cost);
    let mut targets = vec![0.0; signs.len()];
    let mut epochs = 0;
    let mut probe = |b: f64, state: &mut DcdState| -> f64 {
        for (t, s) in targets.iter_mut().zip(signs) {
            *t = 1.0 - s * b;
        }
        epochs += state.run(x, &targets, tol, 200).0;
        state.signed_alpha_sum()
    };
    let h_tol = tol * cost;
    let mut lo = (0.0, probe(0.0, &mut state));
    if lo.1.abs() <= h_tol {
        return (state.alpha, epochs);
    }
    // walk until the sign flips
    let dir = lo.1.signum();
    let mut step = 1.0;
    let mut hi;
    let mut probes = 1;
    loop {
        let b = lo.0 + dir * step;
        let h = probe(b, &mut state);
        probes += 1;
        if h.abs() <= h_tol || probes >= max_probes {
            return (state.alpha, epochs);
        }
        if h.signum() != dir {
            hi = (b, h);
            break;
        }
        lo = (b, h);
        step *= 2.0;
    }
    // Illinois regula falsi
    let mut side = 0i8;
    while probes < max_probes {
        let mut b = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
        let (a, c) = (lo.0.min(hi.0), lo.0.max(hi.0));
        if !(b > a && b < c) {
            b = 0.5 * (a + c);
        }
        let h = probe(b, &mut state);
        probes += 1;
        if h.abs() <= h_tol || (c - a) <= 1e-9 * (1.0 + b.abs()) {
            break;
        }
        if h.signum() == dir {
            lo = (b, h);
            if side == 1 {
                hi.1 *= 0.5;
            }
            side = 1;
        } else {
            hi = (b, h);
            if side == -1 {
                lo.1 *= 0.5;
            }
            side = -1;
        }
    }
    (state.alpha, epochs)
}

/// Soft-margin linear SVM through the origin (`b = 0`).
pub fn train_linear_svm_no_bias(x: &DenseRows, y: &[Label], cfg: &SvmConfig) -> Result<SvmFit> {
    cfg.validate()?;
    let signs = check_inputs(x, y)?;
    let targets = vec![1.0; signs.len()];
    let fit = solve_margin_svm(x, &signs, &targets, cfg.reg_cost, cfg);
    Ok(SvmFit {
        hyperplane: Hyperplane::new(fit.weights, 0.0),
        iterations: fit.epochs,
        residual: fit.residual,
        converged: fit.converged,
    })
}

/// Adaptive SVM: minimizes `½‖ψ − c1 ψˢ‖² + c2 Σ ε_k` subject to
/// `y_k ψ·x_k ≥ 1 − ε_k`, `ε_k ≥ 0`. No bias term; `cfg.reg_cost` is
/// unused in favour of `c2`.
///
/// Solved as a standard SVM in `ψ' = ψ − c1 ψˢ` with per-sample margin
/// targets `1 − c1 y_k ψˢ·x_k`, then shifted back.
pub fn train_adaptive_svm(
    x: &DenseRows,
    y: &[Label],
    source: &Hyperplane,
    c1: f64,
    c2: f64,
    cfg: &SvmConfig,
) -> Result<SvmFit> {
    cfg.validate()?;
    if !(c1 >= 0.0 && c1.is_finite()) {
        return Err(invalid("C1 must be a finite nonnegative number"));
    }
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(invalid("C2 must be positive"));
    }
    if source.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            actual: x.dim(),
        });
    }
    let signs = check_inputs(x, y)?;
    let targets: Vec<f64> = (0..signs.len())
        .map(|k| 1.0 - c1 * signs[k] * x.dot(k, &source.weights))
        .collect();
    let fit = solve_margin_svm(x, &signs, &targets, c2, cfg);
    let weights = fit
        .weights
        .iter()
        .zip(&source.weights)
        .map(|(w, s)| w + c1 * s)
        .collect();
    Ok(SvmFit {
        hyperplane: Hyperplane::new(weights, 0.0),
        iterations: fit.epochs,
        residual: fit.residual,
        converged: fit.converged,
    })
}
