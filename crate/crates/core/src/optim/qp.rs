//! Threshold QP for path-level adaptation:
//!
//! ```text
//! min_B  ½‖B − B̃‖² + C Σ ε_r
//! s.t.   ε_r ≥ 0,  y_r (W_r · (s_r + B[ids_r]) + b_r) ≥ −ε_r
//! ```
//!
//! With `u = B − B̃` each constraint is a hinge with margin target
//! `−y_r (W_r · (s_r + B̃[ids_r]) + b_r)` over a sparse row `y_r W_r`
//! scattered onto `ids_r`, i.e. the same margin SVM as the node experts.
//! There are few thresholds but many nearly parallel rows, so it is solved
//! in the primal by [`newton`].

use serde::{Deserialize, Serialize};

use super::dcd::SparseRows;
use super::newton;
use super::SvmConfig;
use crate::data::Label;
use crate::error::{invalid, Error, Result};

/// One `(path, sample)` constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpConstraint {
    /// Threshold indices of the split nodes along the path, root first.
    pub path_node_ids: Vec<usize>,
    /// Expert scores `ψ_j · φ_j(v)` at those nodes, without thresholds.
    pub fixed_scores: Vec<f64>,
    pub path_weights: Vec<f64>,
    pub path_bias: f64,
    pub label: Label,
}

impl QpConstraint {
    /// `y (W · (s + B[ids]) + b)`; nonnegative when satisfied.
    pub fn value(&self, thresholds: &[f64]) -> f64 {
        let proj: f64 = self
            .path_node_ids
            .iter()
            .zip(&self.fixed_scores)
            .zip(&self.path_weights)
            .map(|((&j, s), w)| w * (s + thresholds[j]))
            .sum();
        self.label.sign() * (proj + self.path_bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQpProblem {
    pub n_thresholds: usize,
    pub prior_thresholds: Vec<f64>,
    pub constraints: Vec<QpConstraint>,
    pub penalty: f64,
    pub solver: SvmConfig,
}

/// Adapted thresholds plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub thresholds: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl ThresholdQpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n_thresholds == 0 {
            return Err(invalid("threshold QP needs at least one variable"));
        }
        if self.prior_thresholds.len() != self.n_thresholds {
            return Err(Error::DimensionMismatch {
                expected: self.n_thresholds,
                actual: self.prior_thresholds.len(),
            });
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(invalid("QP penalty must be finite and nonnegative"));
        }
        if self.prior_thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("prior thresholds"));
        }
        for (r, c) in self.constraints.iter().enumerate() {
            let d = c.path_node_ids.len();
            if c.fixed_scores.len() != d || c.path_weights.len() != d {
                return Err(invalid(format!("constraint {r}: length mismatch")));
            }
            if c.path_node_ids.iter().any(|&j| j >= self.n_thresholds) {
                return Err(invalid(format!("constraint {r}: node id out of range")));
            }
            let finite = c
                .fixed_scores
                .iter()
                .chain(&c.path_weights)
                .all(|x| x.is_finite())
                && c.path_bias.is_finite();
            if !finite {
                return Err(Error::NonFinite("threshold QP constraint"));
            }
        }
        Ok(())
    }

    pub fn objective(&self, thresholds: &[f64]) -> f64 {
        let reg: f64 = thresholds
            .iter()
            .zip(&self.prior_thresholds)
            .map(|(b, p)| (b - p).powi(2))
            .sum();
        let slack: f64 = self
            .constraints
            .iter()
            .map(|c| (-c.value(thresholds)).max(0.0))
            .sum();
        0.5 * reg + self.penalty * slack
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn solve_threshold_qp(problem: &ThresholdQpProblem) -> Result<QpSolution> {
    problem.validate()?;
    problem.solver.validate()?;
    let prior = &problem.prior_thresholds;
    if problem.penalty == 0.0 || problem.constraints.is_empty() {
        return Ok(QpSolution {
            thresholds: prior.clone(),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let mut rows = SparseRows::new(problem.n_thresholds);
    let mut targets = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let y = c.label.sign();
        rows.push(
            c.path_node_ids
                .iter()
                .zip(&c.path_weights)
                .map(|(&j, w)| (j, y * w)),
        );
        targets.push(-c.value(prior));
    }
    let cfg = &problem.solver;
    let fit = newton::solve(&rows, &targets, problem.penalty, cfg.tol, cfg.max_iter);
    let thresholds = prior.iter().zip(&fit.weights).map(|(p, u)| p + u).collect();
    Ok(QpSolution {
        thresholds,
        iterations: fit.iterations,
        residual: fit.gap,
        converged: fit.converged,
    })
}
