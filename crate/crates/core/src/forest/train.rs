//! Growing trees and forests from labeled data.

use crate::data::{mix_seed, sample_selectors, ClassCounts, Dataset, Label};
use crate::error::{invalid, Error, Result};
use crate::optim::{train_linear_svm, DenseRows};

use super::split::{best_threshold, ThresholdChoice};
use super::tree::{SplitParams, Tree, TreeNode};
use super::{Forest, ForestConfig, Provenance};

/// A trained split together with the counts it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSplit {
    pub params: SplitParams,
    pub gain: f64,
    pub left: ClassCounts,
    pub right: ClassCounts,
}

/// Trains one split node on all of `data`: draws the candidate selectors,
/// fits a linear SVM per candidate, and keeps the candidate whose best
/// threshold has the highest gain (earliest candidate on ties).
///
/// Fails with [`Error::DegenerateData`] when no candidate yields a
/// two-sided split.
pub fn train_node(data: &Dataset, cfg: &ForestConfig, seed: u64) -> Result<NodeSplit> {
    cfg.validate()?;
    let idx: Vec<usize> = (0..data.len()).collect();
    if !data.counts().has_both() {
        return Err(Error::DegenerateData("node needs both classes".into()));
    }
    fit_node(data, &idx, cfg, seed)
}

fn fit_node(data: &Dataset, idx: &[usize], cfg: &ForestConfig, seed: u64) -> Result<NodeSplit> {
    let selectors = sample_selectors(data.dim(), cfg.candidates, cfg.block_fraction, seed)?;
    let labels: Vec<Label> = idx.iter().map(|&i| data.get(i).label()).collect();
    let mut best: Option<NodeSplit> = None;
    for selector in selectors {
        let x = project(data, idx, |v| selector.apply(v).expect("selector fits dataset"));
        let Ok(fit) = train_linear_svm(&x, &labels, &cfg.svm) else {
            continue;
        };
        let weights = fit.hyperplane.weights;
        if weights.iter().all(|&w| w == 0.0) || weights.iter().any(|w| !w.is_finite()) {
            continue;
        }
        let scores: Vec<f64> = idx
            .iter()
            .map(|&i| selector.dot(&weights, data.get(i).features()))
            .collect();
        let Some(choice) = two_sided(&scores, &labels)? else {
            continue;
        };
        if best.as_ref().is_none_or(|b| choice.gain > b.gain) {
            best = Some(NodeSplit {
                params: SplitParams::new(selector, weights, choice.threshold)?,
                gain: choice.gain,
                left: choice.left,
                right: choice.right,
            });
        }
    }
    best.ok_or_else(|| Error::DegenerateData("no candidate expert splits the node".into()))
}

/// The best threshold, or `None` when every score is equal and no split
/// puts samples on both sides.
pub(crate) fn two_sided(scores: &[f64], labels: &[Label]) -> Result<Option<ThresholdChoice>> {
    let choice = best_threshold(scores, labels)?;
    if choice.left.total() == 0 || choice.right.total() == 0 {
        return Ok(None);
    }
    Ok(Some(choice))
}

pub(crate) fn project(data: &Dataset, idx: &[usize], f: impl Fn(&[f64]) -> Vec<f64>) -> DenseRows {
    let mut rows: Option<DenseRows> = None;
    for &i in idx {
        let row = f(data.get(i).features());
        rows.get_or_insert_with(|| DenseRows::with_capacity(row.len(), idx.len()))
            .push(&row);
    }
    rows.unwrap_or_else(|| DenseRows::new(0))
}

/// Whether a node holding `counts` at `depth` (root = 1) must be a leaf.
fn stop_here(counts: ClassCounts, depth: usize, cfg: &ForestConfig) -> bool {
    depth >= cfg.max_depth
        || counts.total() < cfg.min_samples
        || counts.majority_fraction() >= cfg.purity_stop
}

pub(crate) fn leaf_node(counts: ClassCounts) -> TreeNode {
    TreeNode::Leaf {
        posterior_pos: counts.smoothed_posterior(),
        sample_count: counts.total(),
    }
}

/// Grows one tree on all of `data`. Node seeds derive from `seed` and the
/// node's position, so the tree is a pure function of its inputs.
pub fn grow_tree(data: &Dataset, cfg: &ForestConfig, seed: u64) -> Result<Tree> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("cannot grow a tree on an empty dataset"));
    }
    let mut tree = Tree {
        root: 0,
        max_depth: cfg.max_depth,
        origin: None,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..data.len()).collect();
    grow(data, idx, 1, 1, cfg, seed, &mut tree.nodes)?;
    Ok(tree)
}

fn grow(
    data: &Dataset,
    idx: Vec<usize>,
    depth: usize,
    position: u64,
    cfg: &ForestConfig,
    seed: u64,
    nodes: &mut Vec<TreeNode>,
) -> Result<usize> {
    let counts = data.counts_of(idx.iter().copied());
    let id = nodes.len();
    nodes.push(leaf_node(counts));
    if stop_here(counts, depth, cfg) {
        return Ok(id);
    }
    let split = match fit_node(data, &idx, cfg, mix_seed(seed, position)) {
        Ok(s) => s,
        Err(Error::DegenerateData(_)) => return Ok(id),
        Err(e) => return Err(e),
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
        split.params.score_unchecked(data.get(i).features()) + split.params.threshold >= 0.0
    });
    let left = grow(data, l, depth + 1, position.wrapping_mul(2), cfg, seed, nodes)?;
    let right = grow(
        data,
        r,
        depth + 1,
        position.wrapping_mul(2).wrapping_add(1),
        cfg,
        seed,
        nodes,
    )?;
    nodes[id] = TreeNode::Split {
        params: split.params,
        left,
        right,
    };
    Ok(id)
}

/// Trains `cfg.n_trees` trees on the whole dataset; tree `i` uses seed
/// `cfg.seed + i`. There is no bagging.
pub fn train_forest(data: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    if !data.counts().has_both() {
        return Err(invalid("training data needs both classes"));
    }
    let trees = (0..cfg.n_trees)
        .map(|i| grow_tree(data, cfg, cfg.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Forest::new(Provenance::Source, data.dim(), cfg.clone(), trees)
}
