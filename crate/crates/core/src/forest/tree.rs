//! Tree arena, routing and structural queries.

use serde::{Deserialize, Serialize};

use crate::data::FeatureSelector;
use crate::error::{invalid, Error, Result};

/// θ = (selector, weights, threshold) of one split node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub selector: FeatureSelector,
    pub weights: Vec<f64>,
    pub threshold: f64,
}

impl SplitParams {
    pub fn new(selector: FeatureSelector, weights: Vec<f64>, threshold: f64) -> Result<Self> {
        let p = Self {
            selector,
            weights,
            threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.selector.len() {
            return Err(Error::DimensionMismatch {
                expected: self.selector.len(),
                actual: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.threshold.is_finite() {
            return Err(Error::NonFinite("split parameters"));
        }
        Ok(())
    }

    /// `ψ · φ(v)`, without the threshold.
    pub fn score(&self, v: &[f64]) -> Result<f64> {
        self.selector.check(v.len())?;
        Ok(self.score_unchecked(v))
    }

    pub(crate) fn score_unchecked(&self, v: &[f64]) -> f64 {
        self.selector.dot(&self.weights, v)
    }

    /// `ψ · φ(v) + τ`; nonnegative values route left.
    pub fn decision(&self, v: &[f64]) -> Result<f64> {
        Ok(self.score(v)? + self.threshold)
    }

    pub fn goes_left(&self, v: &[f64]) -> Result<bool> {
        Ok(self.decision(v)? >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        params: SplitParams,
        left: usize,
        right: usize,
    },
    Leaf {
        posterior_pos: f64,
        sample_count: usize,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn split_params(&self) -> Option<&SplitParams> {
        match self {
            TreeNode::Split { params, .. } => Some(params),
            TreeNode::Leaf { .. } => None,
        }
    }
}

/// Where a tree in an adapted forest came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeOrigin {
    Source,
    Target,
}

/// One root-to-leaf path: the split nodes visited, the direction taken at
/// each (`true` = left), and the leaf reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreePath {
    pub nodes: Vec<usize>,
    pub turns: Vec<bool>,
    pub leaf: usize,
}

impl TreePath {
    /// Number of split nodes on the path.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: usize,
    pub max_depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<TreeOrigin>,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(posterior_pos: f64, sample_count: usize, max_depth: usize) -> Self {
        Self {
            root: 0,
            max_depth,
            origin: None,
            nodes: vec![TreeNode::Leaf {
                posterior_pos,
                sample_count,
            }],
        }
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    /// Checks that the arena is a tree rooted at `root`: every node is
    /// reached exactly once, children differ, paths respect `max_depth`,
    /// and parameters are well formed for inputs of length `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_depth == 0 {
            return Err(invalid("tree depth bound must be positive"));
        }
        if self.root >= self.nodes.len() {
            return Err(invalid("tree root out of range"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 1usize)];
        while let Some((id, depth)) = stack.pop() {
            if id >= self.nodes.len() {
                return Err(invalid(format!("node id {id} out of range")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(invalid(format!("node {id} reached twice")));
            }
            if depth > self.max_depth {
                return Err(invalid(format!("path deeper than {}", self.max_depth)));
            }
            match &self.nodes[id] {
                TreeNode::Split { params, left, right } => {
                    if left == right {
                        return Err(invalid(format!("node {id} has identical children")));
                    }
                    params.validate()?;
                    params.selector.check(dim)?;
                    stack.push((*right, depth + 1));
                    stack.push((*left, depth + 1));
                }
                TreeNode::Leaf { posterior_pos, .. } => {
                    if !(0.0..=1.0).contains(posterior_pos) {
                        return Err(invalid(format!("leaf {id} posterior outside [0, 1]")));
                    }
                }
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("node {id} unreachable from root")));
        }
        Ok(())
    }

    /// Id of the leaf that `v` reaches. Selector ranges are checked along
    /// the way.
    pub fn route(&self, v: &[f64]) -> Result<usize> {
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                TreeNode::Split { params, left, right } => {
                    id = if params.goes_left(v)? { *left } else { *right }
                }
                TreeNode::Leaf { .. } => return Ok(id),
            }
        }
    }

    pub(crate) fn route_unchecked(&self, v: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                TreeNode::Split { params, left, right } => {
                    id = if params.score_unchecked(v) + params.threshold >= 0.0 {
                        *left
                    } else {
                        *right
                    }
                }
                TreeNode::Leaf { .. } => return id,
            }
        }
    }

    pub(crate) fn leaf_posterior(&self, id: usize) -> f64 {
        match self.nodes[id] {
            TreeNode::Leaf { posterior_pos, .. } => posterior_pos,
            TreeNode::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }

    /// All root-to-leaf paths, left subtrees first.
    pub fn paths(&self) -> Vec<TreePath> {
        let mut out = Vec::new();
        let mut nodes = Vec::new();
        let mut turns = Vec::new();
        self.collect_paths(self.root, &mut nodes, &mut turns, &mut out);
        out
    }

    fn collect_paths(
        &self,
        id: usize,
        nodes: &mut Vec<usize>,
        turns: &mut Vec<bool>,
        out: &mut Vec<TreePath>,
    ) {
        match &self.nodes[id] {
            TreeNode::Leaf { .. } => out.push(TreePath {
                nodes: nodes.clone(),
                turns: turns.clone(),
                leaf: id,
            }),
            TreeNode::Split { left, right, .. } => {
                nodes.push(id);
                for (child, turn) in [(*left, true), (*right, false)] {
                    turns.push(turn);
                    self.collect_paths(child, nodes, turns, out);
                    turns.pop();
                }
                nodes.pop();
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn split_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Longest root-to-leaf path counted in nodes, so a single leaf has
    /// depth 1.
    pub fn depth(&self) -> usize {
        self.paths().iter().map(|p| p.len() + 1).max().unwrap_or(1)
    }
}
