//! Path-Adapt: retrain a structure-cloned forest on the target samples,
//! then move only its thresholds so that target path projections agree
//! with hyperplanes stored from the source domain.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{invalid, Error, Result};
use crate::forest::{project, two_sided, Forest, ForestConfig, Provenance, SplitParams, Tree, TreeNode};
use crate::optim::{
    solve_threshold_qp, train_linear_svm, DenseRows, Hyperplane, QpConstraint, SvmConfig, ThresholdQpProblem,
};

use super::{check_target, rebuild, structure_map};

pub const PATH_MODEL_VERSION: u32 = 1;

/// Source hyperplanes for one root-to-leaf path, one per prefix length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    /// Split node ids along the path in the source tree, root first.
    pub nodes: Vec<usize>,
    /// Prefix length → hyperplane over the first that many node scores.
    pub prefixes: BTreeMap<usize, Hyperplane>,
}

/// Compact stand-in for the source data: per tree, per path, per prefix
/// length, a linear SVM over source path projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathModel {
    pub format_version: u32,
    /// [`Forest::fingerprint`] of the forest the paths were exported from.
    pub fingerprint: String,
    pub trees: BTreeMap<usize, BTreeMap<usize, PathEntry>>,
}

impl PathModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: PathModel = serde_json::from_str(s)?;
        if m.format_version != PATH_MODEL_VERSION {
            return Err(Error::IncompatibleModel(format!(
                "unsupported path model version {}",
                m.format_version
            )));
        }
        for paths in m.trees.values() {
            for entry in paths.values() {
                for (&len, h) in &entry.prefixes {
                    if len == 0 || len > entry.nodes.len() || h.dim() != len {
                        return Err(invalid(format!(
                            "prefix hyperplane of length {len} does not fit its path"
                        )));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fails unless the model was exported from `forest`.
    pub fn check_source(&self, forest: &Forest) -> Result<()> {
        if self.fingerprint != forest.fingerprint() {
            return Err(Error::IncompatibleModel(
                "path model was exported from a different forest".into(),
            ));
        }
        Ok(())
    }

    /// The stored hyperplane for the first `prefix.len()` nodes of any
    /// source path starting with `prefix`.
    fn prefix_svm(&self, tree: usize, prefix: &[usize]) -> Result<&Hyperplane> {
        self.trees
            .get(&tree)
            .into_iter()
            .flat_map(|paths| paths.values())
            .find(|e| e.nodes.starts_with(prefix))
            .and_then(|e| e.prefixes.get(&prefix.len()))
            .ok_or_else(|| {
                Error::IncompatibleModel(format!(
                    "no stored hyperplane for prefix {prefix:?} of tree {tree}"
                ))
            })
    }
}

/// Decision scores `ψ_j · φ_j(v) + τ_j` along `nodes`, which must be a
/// root-descending chain of split nodes.
pub fn path_projection(tree: &Tree, nodes: &[usize], v: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(nodes.len());
    for (pos, &id) in nodes.iter().enumerate() {
        let continues = id < tree.nodes.len()
            && if pos == 0 {
                id == tree.root
            } else {
                matches!(tree.node(nodes[pos - 1]),
                    TreeNode::Split { left, right, .. } if *left == id || *right == id)
            };
        if !continues {
            return Err(invalid(format!("node {id} does not continue the path")));
        }
        let TreeNode::Split { params, .. } = tree.node(id) else {
            return Err(invalid(format!("path node {id} is a leaf")));
        };
        out.push(params.decision(v)?);
    }
    Ok(out)
}

/// Trains, for every path of every tree and every prefix length, a
/// standard linear SVM over the path projections of all source samples.
/// Paths sharing a prefix share its hyperplane.
pub fn export_path_svms(source: &Forest, data: &Dataset, cfg: &SvmConfig) -> Result<PathModel> {
    cfg.validate()?;
    source.check_dataset(data)?;
    if !data.counts().has_both() {
        return Err(invalid("source set needs samples of both classes"));
    }
    let labels: Vec<Label> = data.samples().iter().map(|s| s.label()).collect();
    let mut trees = BTreeMap::new();
    for (t, tree) in source.trees.iter().enumerate() {
        let decisions: Vec<Option<Vec<f64>>> = tree
            .nodes
            .iter()
            .map(|n| {
                n.split_params().map(|p| {
                    data.samples()
                        .iter()
                        .map(|s| p.score_unchecked(s.features()) + p.threshold)
                        .collect()
                })
            })
            .collect();
        let mut cache: HashMap<Vec<usize>, Hyperplane> = HashMap::new();
        let mut paths = BTreeMap::new();
        for (p, path) in tree.paths().into_iter().enumerate() {
            let mut prefixes = BTreeMap::new();
            for len in 1..=path.len() {
                let prefix = &path.nodes[..len];
                if !cache.contains_key(prefix) {
                    let mut x = DenseRows::with_capacity(len, data.len());
                    let mut row = vec![0.0; len];
                    for k in 0..data.len() {
                        for (r, &j) in row.iter_mut().zip(prefix) {
                            *r = decisions[j].as_ref().expect("split node")[k];
                        }
                        x.push(&row);
                    }
                    let fit = train_linear_svm(&x, &labels, cfg)?;
                    cache.insert(prefix.to_vec(), fit.hyperplane);
                }
                prefixes.insert(len, cache[prefix].clone());
            }
            paths.insert(
                p,
                PathEntry {
                    nodes: path.nodes,
                    prefixes,
                },
            );
        }
        trees.insert(t, paths);
    }
    Ok(PathModel {
        format_version: PATH_MODEL_VERSION,
        fingerprint: source.fingerprint(),
        trees,
    })
}

/// Clones every source tree's topology and selectors and retrains each
/// expert and threshold from scratch on the target samples reaching it,
/// pruning where the target data runs out.
pub fn retrain_structure(source: &Forest, target: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    check_target(source.dim, target)?;
    let trees = source
        .trees
        .iter()
        .map(|tree| {
            rebuild(tree, target, cfg, |_, sp, idx| {
                refit_standard(sp, target, idx, cfg)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = ForestConfig {
        n_trees: trees.len(),
        ..cfg.clone()
    };
    Forest::new(Provenance::Target, source.dim, config, trees)
}

fn refit_standard(
    sp: &SplitParams,
    data: &Dataset,
    idx: &[usize],
    cfg: &ForestConfig,
) -> Result<Option<SplitParams>> {
    let x = project(data, idx, |v| {
        sp.selector.apply(v).expect("selector fits dataset")
    });
    let labels: Vec<Label> = idx.iter().map(|&i| data.get(i).label()).collect();
    let Ok(fit) = train_linear_svm(&x, &labels, &cfg.svm) else {
        return Ok(None);
    };
    let weights = fit.hyperplane.weights;
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(None);
    }
    let scores: Vec<f64> = idx
        .iter()
        .map(|&i| sp.selector.dot(&weights, data.get(i).features()))
        .collect();
    let Some(choice) = two_sided(&scores, &labels)? else {
        return Ok(None);
    };
    Ok(Some(SplitParams::new(
        sp.selector.clone(),
        weights,
        choice.threshold,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAdaptParams {
    /// Slack cost of the threshold QP.
    pub penalty: f64,
    /// Stopping rule of the threshold QP; its `reg_cost` is ignored.
    pub qp: SvmConfig,
}

impl Default for PathAdaptParams {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            qp: SvmConfig::default(),
        }
    }
}

/// Every stage of a Path-Adapt run, kept for inspection.
#[derive(Debug, Clone)]
pub struct PathAdaptOutcome {
    /// Source structure retrained on the target samples.
    pub retrained: Forest,
    /// `retrained` with the optimized thresholds, before pruning.
    pub thresholded: Vec<Tree>,
    /// Final forest after re-routing the target samples.
    pub adapted: Forest,
}

/// Path-Adapt; see [`path_adapt_detailed`].
pub fn path_adapt(
    source: &Forest,
    paths: &PathModel,
    target: &Dataset,
    params: PathAdaptParams,
    cfg: &ForestConfig,
) -> Result<Forest> {
    Ok(path_adapt_detailed(source, paths, target, params, cfg)?.adapted)
}

/// Retrains the source structure on `target`, re-solves each tree's
/// thresholds against the stored source path hyperplanes (one constraint
/// per target sample and path), then re-routes `target` to prune and to
/// recompute leaf posteriors.
///
/// Fails with [`Error::IncompatibleModel`] if `paths` was not exported
/// from `source`, and with [`Error::NotConverged`] if a threshold QP
/// exhausts its iteration budget.
pub fn path_adapt_detailed(
    source: &Forest,
    paths: &PathModel,
    target: &Dataset,
    params: PathAdaptParams,
    cfg: &ForestConfig,
) -> Result<PathAdaptOutcome> {
    paths.check_source(source)?;
    if !(params.penalty >= 0.0 && params.penalty.is_finite()) {
        return Err(invalid("path penalty must be a finite nonnegative number"));
    }
    params.qp.validate()?;
    let retrained = retrain_structure(source, target, cfg)?;
    let mut thresholded = Vec::with_capacity(retrained.trees.len());
    let mut adapted = Vec::with_capacity(retrained.trees.len());
    for (t, (tree, src)) in retrained.trees.iter().zip(&source.trees).enumerate() {
        let moved = adapt_thresholds(t, tree, src, paths, target, params)?;
        let reshaped = rebuild(&moved, target, cfg, |_, sp, _| Ok(Some(sp.clone())))?;
        thresholded.push(moved);
        adapted.push(reshaped);
    }
    let mut adapted = Forest::new(
        Provenance::PathAdapt,
        source.dim,
        retrained.config.clone(),
        adapted,
    )?;
    adapted.params.insert("C".into(), params.penalty);
    Ok(PathAdaptOutcome {
        retrained,
        thresholded,
        adapted,
    })
}

fn adapt_thresholds(
    t: usize,
    tree: &Tree,
    source: &Tree,
    paths: &PathModel,
    target: &Dataset,
    params: PathAdaptParams,
) -> Result<Tree> {
    let map = structure_map(tree, source)?;
    let splits: Vec<usize> = (0..tree.nodes.len())
        .filter(|&id| !tree.node(id).is_leaf())
        .collect();
    if splits.is_empty() {
        return Ok(tree.clone());
    }
    let mut var = vec![usize::MAX; tree.nodes.len()];
    for (k, &id) in splits.iter().enumerate() {
        var[id] = k;
    }
    let params_of = |id: usize| tree.node(id).split_params().expect("split node");
    let prior: Vec<f64> = splits.iter().map(|&id| params_of(id).threshold).collect();
    let scores: Vec<Vec<f64>> = tree
        .nodes
        .iter()
        .map(|n| match n.split_params() {
            Some(p) => target
                .samples()
                .iter()
                .map(|s| p.score_unchecked(s.features()))
                .collect(),
            None => Vec::new(),
        })
        .collect();

    let mut constraints = Vec::new();
    for path in tree.paths() {
        let src_prefix: Vec<usize> = path.nodes.iter().map(|&id| map[id]).collect();
        let h = paths.prefix_svm(t, &src_prefix)?;
        let ids: Vec<usize> = path.nodes.iter().map(|&id| var[id]).collect();
        for (k, s) in target.samples().iter().enumerate() {
            constraints.push(QpConstraint {
                path_node_ids: ids.clone(),
                fixed_scores: path.nodes.iter().map(|&id| scores[id][k]).collect(),
                path_weights: h.weights.clone(),
                path_bias: h.bias,
                label: s.label(),
            });
        }
    }
    let problem = ThresholdQpProblem {
        n_thresholds: splits.len(),
        prior_thresholds: prior,
        constraints,
        penalty: params.penalty,
        solver: params.qp,
    };
    let sol = solve_threshold_qp(&problem)?;
    if !sol.converged {
        return Err(Error::NotConverged(format!(
            "threshold QP of tree {t} stopped with residual {:.3e}",
            sol.residual
        )));
    }
    let mut moved = tree.clone();
    for (&id, tau) in splits.iter().zip(sol.thresholds) {
        if let TreeNode::Split { params, .. } = &mut moved.nodes[id] {
            params.threshold = tau;
        }
    }
    Ok(moved)
}
