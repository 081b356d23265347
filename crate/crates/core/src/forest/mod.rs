//! Random forest of local experts: training, inference and the model file.

mod split;
mod train;
mod tree;

pub use split::{best_threshold, class_entropy, information_gain, ThresholdChoice};
pub use train::{grow_tree, train_forest, train_node, NodeSplit};
pub use tree::{SplitParams, Tree, TreeNode, TreeOrigin, TreePath};

pub(crate) use train::{leaf_node, project, two_sided};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Label};
use crate::error::{invalid, Error, Result};
use crate::optim::SvmConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Maximum path length in nodes; 1 means a single leaf.
    pub max_depth: usize,
    pub min_samples: usize,
    pub purity_stop: f64,
    /// Candidate selectors per split node.
    pub candidates: usize,
    pub block_fraction: f64,
    pub svm: SvmConfig,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 7,
            min_samples: 8,
            purity_stop: 0.99,
            candidates: 50,
            block_fraction: 0.3,
            svm: SvmConfig::default(),
            decision_threshold: 0.5,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples == 0 || self.candidates == 0 {
            return Err(invalid(
                "n_trees, max_depth, min_samples and candidates must be positive",
            ));
        }
        if !(self.purity_stop > 0.5 && self.purity_stop <= 1.0) {
            return Err(invalid("purity_stop must lie in (0.5, 1]"));
        }
        if !(self.block_fraction > 0.0 && self.block_fraction <= 1.0) {
            return Err(invalid("block_fraction must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(invalid("decision_threshold must lie in [0, 1]"));
        }
        self.svm.validate()
    }
}

/// How a forest was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Source,
    Target,
    NodeAdapt,
    PathAdapt,
    TreeAdapt,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Source => "source",
            Provenance::Target => "target",
            Provenance::NodeAdapt => "node-adapt",
            Provenance::PathAdapt => "path-adapt",
            Provenance::TreeAdapt => "tree-adapt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub provenance: Provenance,
    /// Length of the feature vectors the forest accepts.
    pub dim: usize,
    pub config: ForestConfig,
    /// Hyper-parameters of the adaptation that produced the forest.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn new(provenance: Provenance, dim: usize, config: ForestConfig, trees: Vec<Tree>) -> Result<Self> {
        let f = Self {
            format_version: FORMAT_VERSION,
            provenance,
            dim,
            config,
            params: BTreeMap::new(),
            trees,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::IncompatibleModel(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.trees.is_empty() {
            return Err(invalid("a forest needs at least one tree"));
        }
        if self.dim == 0 {
            return Err(invalid("forest input dimension must be positive"));
        }
        self.config.validate()?;
        self.trees.iter().try_for_each(|t| t.validate(self.dim))
    }

    fn check_input(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: data.dim(),
            });
        }
        Ok(())
    }

    /// SHA-256 over the serialized trees and input dimension. Path models
    /// carry it to prove which forest they were exported from.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dim.to_le_bytes());
        h.update(serde_json::to_vec(&self.trees).expect("trees serialize"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Posterior of one tree; rejects inputs of the wrong length.
    pub fn tree_posterior(&self, tree: usize, v: &[f64]) -> Result<f64> {
        self.check_input(v)?;
        tree_posterior(&self.trees[tree], v)
    }

    /// Mean of the tree posteriors.
    pub fn posterior(&self, v: &[f64]) -> Result<f64> {
        self.check_input(v)?;
        Ok(self.posterior_unchecked(v))
    }

    pub(crate) fn posterior_unchecked(&self, v: &[f64]) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.leaf_posterior(t.route_unchecked(v)))
            .sum();
        sum / self.trees.len() as f64
    }

    /// Posteriors of every sample in `data`.
    pub fn posteriors(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(data)?;
        Ok(data
            .samples()
            .iter()
            .map(|s| self.posterior_unchecked(s.features()))
            .collect())
    }

    /// `+1` iff the posterior reaches the configured decision threshold.
    pub fn classify(&self, v: &[f64]) -> Result<Label> {
        classify(self, v, self.config.decision_threshold)
    }

    /// Fraction of `data` misclassified at the configured threshold.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        let post = self.posteriors(data)?;
        if post.is_empty() {
            return Err(invalid("error rate of an empty dataset"));
        }
        let wrong = post
            .iter()
            .zip(data.samples())
            .filter(|(p, s)| (**p >= self.config.decision_threshold) != s.label().is_pos())
            .count();
        Ok(wrong as f64 / post.len() as f64)
    }
}

/// Routes `v` to a leaf and returns its positive-class posterior.
pub fn tree_posterior(tree: &Tree, v: &[f64]) -> Result<f64> {
    Ok(tree.leaf_posterior(tree.route(v)?))
}

/// `(1/T) Σ_i tree_posterior(tree_i, v)`.
pub fn forest_posterior(forest: &Forest, v: &[f64]) -> Result<f64> {
    forest.posterior(v)
}

/// `+1` iff `forest_posterior(forest, v) ≥ threshold`.
pub fn classify(forest: &Forest, v: &[f64], threshold: f64) -> Result<Label> {
    Ok(if forest.posterior(v)? >= threshold {
        Label::Pos
    } else {
        Label::Neg
    })
}
