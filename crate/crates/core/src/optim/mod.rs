//! Convex solvers behind the node experts and the threshold adaptation.
//!
//! Every problem here reduces to one shape: a bias-free hinge-loss SVM
//! with per-row margin targets,
//!
//! ```text
//! min_w  ½‖w‖² + C Σ_k max(0, m_k − y_k w·x_k)
//! ```
//!
//! which [`dcd`] solves by dual coordinate descent. The standard SVM adds
//! an unregularized bias: a loose root search on the dual equality
//! constraint warm-starts an SMO solve that handles the equality exactly.
//! The adaptive SVM shifts the margins by the source hyperplane, and the
//! threshold QP is the same problem over rows that scatter path-SVM
//! weights onto tree thresholds.

mod dcd;
mod newton;
mod qp;
mod smo;
mod svm;

pub use dcd::{solve_margin_svm, DenseRows, MarginFit, RowSet, SparseRows};
pub use qp::{solve_threshold_qp, QpConstraint, QpSolution, ThresholdQpProblem};
pub use svm::{
    adaptive_svm_objective, svm_objective, train_adaptive_svm, train_linear_svm, train_linear_svm_no_bias,
    Hyperplane, SvmFit,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Soft-margin cost and stopping rule shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub reg_cost: f64,
    /// Bound on the largest projected-gradient entry at termination. The
    /// threshold QP instead stops once its relative duality gap is below
    /// `max(tol², 1e-10)`.
    pub tol: f64,
    /// Cap on coordinate-descent epochs (summed over any outer search), or
    /// on Newton steps for the threshold QP.
    pub max_iter: usize,
    #[serde(default)]
    pub bias: BiasMode,
}

/// How [`train_linear_svm`] treats the offset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    /// Unregularized bias, solved exactly.
    #[default]
    Exact,
    /// The bias is the weight of a constant unit feature and is
    /// regularized with the rest. Far cheaper on large overlapping sets
    /// and close to the exact solution when the offset is small.
    Penalized,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            reg_cost: 1.0,
            tol: 1e-6,
            max_iter: 100_000,
            bias: BiasMode::Exact,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg_cost > 0.0 && self.reg_cost.is_finite()) {
            return Err(invalid("reg_cost must be positive"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(invalid("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}
