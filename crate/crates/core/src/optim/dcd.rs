//! Dual coordinate descent for the bias-free, margin-shifted hinge SVM.
//!
//! Dual: `max_α Σ α_k m_k − ½‖Σ α_k y_k x_k‖²` over the box `0 ≤ α ≤ C`,
//! with `w = Σ α_k y_k x_k`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SvmConfig;

/// Read access to the rows of a design matrix.
pub trait RowSet {
    fn n_rows(&self) -> usize;
    fn dim(&self) -> usize;
    fn dot(&self, i: usize, w: &[f64]) -> f64;
    /// `w += a * x_i`
    fn axpy(&self, i: usize, a: f64, w: &mut [f64]);
    fn sq_norm(&self, i: usize) -> f64;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows {
    dim: usize,
    data: Vec<f64>,
}

impl DenseRows {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Self {
        let mut m = Self::with_capacity(dim, rows.len());
        for r in rows {
            m.push(r);
        }
        m
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row length must match dim");
        self.data.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

impl RowSet for DenseRows {
    fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(x, w)| x * w).sum()
    }

    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for (wj, x) in w.iter_mut().zip(self.row(i)) {
            *wj += a * x;
        }
    }

    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|x| x * x).sum()
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    dim: usize,
    offsets: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseRows {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            offsets: vec![0],
            idx: Vec::new(),
            val: Vec::new(),
        }
    }

    pub fn push(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in entries {
            assert!(j < self.dim, "column index out of range");
            self.idx.push(j);
            self.val.push(v);
        }
        self.offsets.push(self.idx.len());
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

impl RowSet for SparseRows {
    fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.range(i).map(|p| self.val[p] * w[self.idx[p]]).sum()
    }

    fn axpy(&self, i: usize, a: f64, w: &mut [f64]) {
        for p in self.range(i) {
            w[self.idx[p]] += a * self.val[p];
        }
    }

    fn sq_norm(&self, i: usize) -> f64 {
        self.range(i).map(|p| self.val[p] * self.val[p]).sum()
    }
}

/// Solution of the margin-shifted SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginFit {
    pub weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub epochs: usize,
    /// Largest projected-gradient magnitude seen in the final epoch.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `min_w ½‖w‖² + cost Σ_k max(0, targets_k − signs_k w·x_k)`.
pub fn solve_margin_svm<R: RowSet>(
    rows: &R,
    signs: &[f64],
    targets: &[f64],
    cost: f64,
    cfg: &SvmConfig,
) -> MarginFit {
    let mut state = DcdState::new(rows, signs, cost);
    let (epochs, residual, converged) = state.run(rows, targets, cfg.tol, cfg.max_iter);
    MarginFit {
        weights: state.w,
        alpha: state.alpha,
        epochs,
        residual,
        converged,
    }
}

/// Warm-startable solver state; the outer bias search reuses it across
/// shifted margin vectors.
pub(crate) struct DcdState<'a> {
    signs: &'a [f64],
    cost: f64,
    qdiag: Vec<f64>,
    pub(crate) alpha: Vec<f64>,
    pub(crate) w: Vec<f64>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<'a> DcdState<'a> {
    pub(crate) fn new<R: RowSet>(rows: &R, signs: &'a [f64], cost: f64) -> Self {
        let n = rows.n_rows();
        assert_eq!(signs.len(), n, "one sign per row");
        let qdiag = (0..n).map(|i| rows.sq_norm(i)).collect();
        Self {
            signs,
            cost,
            qdiag,
            alpha: vec![0.0; n],
            w: vec![0.0; rows.dim()],
            order: (0..n).collect(),
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
        }
    }

    /// Sum of `α_k y_k`: the negated derivative of the optimal value with
    /// respect to a bias that shifts every margin by `−y_k b`.
    pub(crate) fn signed_alpha_sum(&self) -> f64 {
        self.alpha.iter().zip(self.signs).map(|(a, s)| a * s).sum()
    }

    /// Relative primal-dual gap `(P(w) − D(α)) / max(1, P(w))`.
    pub(crate) fn duality_gap<R: RowSet>(&self, rows: &R, targets: &[f64]) -> f64 {
        let wsq: f64 = self.w.iter().map(|x| x * x).sum();
        let mut loss = 0.0;
        let mut lin = 0.0;
        for i in 0..rows.n_rows() {
            let margin = targets[i] - self.signs[i] * rows.dot(i, &self.w);
            loss += margin.max(0.0);
            lin += self.alpha[i] * targets[i];
        }
        let primal = 0.5 * wsq + self.cost * loss;
        let dual = lin - 0.5 * wsq;
        (primal - dual) / primal.abs().max(1.0)
    }

    /// Runs epochs until the projected gradient drops below `tol`. Returns
    /// (epochs used, final residual, converged).
    pub(crate) fn run<R: RowSet>(
        &mut self,
        rows: &R,
        targets: &[f64],
        tol: f64,
        max_epochs: usize,
    ) -> (usize, f64, bool) {
        let n = rows.n_rows();
        assert_eq!(targets.len(), n, "one target per row");
        let c = self.cost;

        // Zero rows do not move w: their optimal multiplier is read off the
        // linear term directly.
        for i in 0..n {
            if self.qdiag[i] == 0.0 {
                let a = if targets[i] > 0.0 { c } else { 0.0 };
                self.alpha[i] = a;
            }
        }

        let mut residual = f64::INFINITY;
        for epoch in 1..=max_epochs {
            self.order.shuffle(&mut self.rng);
            let mut worst: f64 = 0.0;
            for &i in &self.order {
                let q = self.qdiag[i];
                if q == 0.0 {
                    continue;
                }
                let s = self.signs[i];
                let g = s * rows.dot(i, &self.w) - targets[i];
                let a = self.alpha[i];
                let pg = if a <= 0.0 {
                    g.min(0.0)
                } else if a >= c {
                    g.max(0.0)
                } else {
                    g
                };
                worst = worst.max(pg.abs());
                if pg != 0.0 {
                    let next = (a - g / q).clamp(0.0, c);
                    let delta = next - a;
                    if delta != 0.0 {
                        self.alpha[i] = next;
                        rows.axpy(i, delta * s, &mut self.w);
                    }
                }
            }
            residual = worst;
            if worst <= tol {
                return (epoch, residual, true);
            }
            // Degenerate duals (many optimal α for one w) can stall the
            // projected gradient long after w has converged; the duality gap
            // does not stall.
            if epoch % 4 == 0 && self.duality_gap(rows, targets) <= tol * tol {
                return (epoch, residual, true);
            }
        }
        (max_epochs, residual, false)
    }
}
