//! Model-transfer domain adaptation: each method takes a trained source
//! forest plus a small labeled target set and returns a target forest.
//!
//! Node- and Path-Adapt rebuild every source tree top-down on the target
//! samples. A node turns into a leaf when the samples reaching it are too
//! few or too pure, when its expert cannot be refit, or when its split
//! would leave a child empty, so adapted trees are pruned copies of their
//! source trees.

mod node;
mod path;
mod reforest;

pub use node::{node_adapt, NodeAdaptParams};
pub use path::{
    export_path_svms, path_adapt, path_adapt_detailed, path_projection, retrain_structure, PathAdaptOutcome,
    PathAdaptParams, PathEntry, PathModel,
};
pub use reforest::{tree_adapt, TreeAdaptParams};

use crate::data::{ClassCounts, Dataset};
use crate::error::{invalid, Error, Result};
use crate::forest::{leaf_node, ForestConfig, SplitParams, Tree, TreeNode};

/// Checks the preconditions shared by every adapter.
pub(crate) fn check_target(dim: usize, target: &Dataset) -> Result<()> {
    if target.is_empty() {
        return Err(invalid("target set is empty"));
    }
    if target.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: target.dim(),
        });
    }
    if !target.counts().has_both() {
        return Err(invalid("target set needs samples of both classes"));
    }
    Ok(())
}

fn too_small_or_pure(counts: ClassCounts, cfg: &ForestConfig) -> bool {
    counts.total() < cfg.min_samples || counts.majority_fraction() >= cfg.purity_stop
}

/// Copies `source` top-down over `data`. At every source split reached by
/// samples `idx`, `refit(source_id, params, idx)` supplies the new split
/// parameters, or `None` to make a leaf. Leaf posteriors come from the
/// samples that reach them.
pub(crate) fn rebuild<F>(source: &Tree, data: &Dataset, cfg: &ForestConfig, mut refit: F) -> Result<Tree>
where
    F: FnMut(usize, &SplitParams, &[usize]) -> Result<Option<SplitParams>>,
{
    let mut nodes = Vec::new();
    let idx: Vec<usize> = (0..data.len()).collect();
    descend(source, source.root, idx, data, cfg, &mut refit, &mut nodes)?;
    Ok(Tree {
        root: 0,
        max_depth: source.max_depth,
        origin: source.origin,
        nodes,
    })
}

fn descend<F>(
    source: &Tree,
    src_id: usize,
    idx: Vec<usize>,
    data: &Dataset,
    cfg: &ForestConfig,
    refit: &mut F,
    nodes: &mut Vec<TreeNode>,
) -> Result<usize>
where
    F: FnMut(usize, &SplitParams, &[usize]) -> Result<Option<SplitParams>>,
{
    let counts = data.counts_of(idx.iter().copied());
    let id = nodes.len();
    nodes.push(leaf_node(counts));
    let TreeNode::Split {
        params,
        left: src_left,
        right: src_right,
    } = source.node(src_id)
    else {
        return Ok(id);
    };
    if too_small_or_pure(counts, cfg) {
        return Ok(id);
    }
    let Some(params) = refit(src_id, params, &idx)? else {
        return Ok(id);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| params.score_unchecked(data.get(i).features()) + params.threshold >= 0.0);
    if l.is_empty() || r.is_empty() {
        return Ok(id);
    }
    let left = descend(source, *src_left, l, data, cfg, refit, nodes)?;
    let right = descend(source, *src_right, r, data, cfg, refit, nodes)?;
    nodes[id] = TreeNode::Split { params, left, right };
    Ok(id)
}

/// Maps every node of `adapted` to the source node at the same position,
/// failing unless `adapted` is a pruned copy of `source` with the same
/// feature selectors at every surviving split.
pub fn structure_map(adapted: &Tree, source: &Tree) -> Result<Vec<usize>> {
    let mut map = vec![usize::MAX; adapted.nodes.len()];
    let mut stack = vec![(adapted.root, source.root)];
    while let Some((a, s)) = stack.pop() {
        map[a] = s;
        if let TreeNode::Split { params, left, right } = adapted.node(a) {
            let TreeNode::Split {
                params: sp,
                left: sl,
                right: sr,
            } = source.node(s)
            else {
                return Err(Error::IncompatibleModel(format!(
                    "adapted node {a} splits where source node {s} is a leaf"
                )));
            };
            if params.selector != sp.selector {
                return Err(Error::IncompatibleModel(format!(
                    "adapted node {a} changed the feature selector"
                )));
            }
            stack.push((*left, *sl));
            stack.push((*right, *sr));
        }
    }
    Ok(map)
}
