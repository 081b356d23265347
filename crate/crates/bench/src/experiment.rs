//! The repeated source/target protocol: baselines trained on source data,
//! on the whole target pool and on a small target subsample, against the
//! three adaptation methods run from the source forest and that subsample.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rfda_core::adapt::{
    export_path_svms, node_adapt, path_adapt_detailed, structure_map, tree_adapt, NodeAdaptParams,
    PathAdaptParams, TreeAdaptParams,
};
use rfda_core::config::{apply_forest_keys, KeyValues};
use rfda_core::data::{mix_seed, Dataset};
use rfda_core::error::{Error, Result};
use rfda_core::forest::{train_forest, Forest, ForestConfig, Provenance, Tree, TreeNode};

use crate::domain::{generate_domain_pair, DomainSpec, Shift};
use crate::metrics::evaluate;
use crate::report::{ColumnResult, ExperimentReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Node,
    Path,
    Tree,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "node" => Ok(Method::Node),
            "path" => Ok(Method::Path),
            "tree" => Ok(Method::Tree),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainSpec,
    /// Percentage of the target training pool used for adaptation.
    pub target_percent: f64,
    pub methods: Vec<Method>,
    pub forest: ForestConfig,
    pub node: NodeAdaptParams,
    pub path: PathAdaptParams,
    pub tree: TreeAdaptParams,
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            domain: DomainSpec::default(),
            target_percent: 5.0,
            methods: vec![Method::Node, Method::Path, Method::Tree],
            forest: ForestConfig::default(),
            node: NodeAdaptParams::default(),
            path: PathAdaptParams::default(),
            tree: TreeAdaptParams::default(),
            repeats: 5,
        }
    }
}

impl ExperimentConfig {
    /// Reads a flat `key = value` file. Unknown keys are errors.
    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut cfg = ExperimentConfig::default();
        kv.take_into("name", &mut cfg.name)?;
        let d = &mut cfg.domain;
        if let Some(f) = kv.take::<String>("family")? {
            d.family = f.parse().map_err(Error::InvalidArgument)?;
        }
        kv.take_into("dim", &mut d.dim)?;
        kv.take_into("pos_prior", &mut d.pos_prior)?;
        kv.take_into("noise", &mut d.noise)?;
        if let Some(k) = kv.take("informative_pairs")? {
            d.informative_pairs = Some(k);
        }
        kv.take_into("n_source", &mut d.n_source)?;
        kv.take_into("n_target_train", &mut d.n_target_train)?;
        kv.take_into("n_target_test", &mut d.n_target_test)?;
        kv.take_into("rotation_deg", &mut d.shift.rotation_deg)?;
        if let Some(t) = kv.take_reals("translation")? {
            d.shift.translation = t;
        }
        kv.take_into("scale", &mut d.shift.scale)?;
        kv.take_into("data_seed", &mut d.seed)?;
        kv.take_into("target_percent", &mut cfg.target_percent)?;
        kv.take_into("repeats", &mut cfg.repeats)?;
        if let Some(m) = kv.take::<String>("methods")? {
            cfg.methods = m
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(Error::InvalidArgument))
                .collect::<Result<Vec<_>>>()?;
        }
        kv.take_into("node_c1", &mut cfg.node.c1)?;
        kv.take_into("node_c2", &mut cfg.node.c2)?;
        kv.take_into("path_c", &mut cfg.path.penalty)?;
        kv.take_into("qp_tol", &mut cfg.path.qp.tol)?;
        kv.take_into("qp_max_iter", &mut cfg.path.qp.max_iter)?;
        kv.take_into("tree_c", &mut cfg.tree.ratio)?;
        apply_forest_keys(&mut kv, &mut cfg.forest)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.forest.validate()?;
        if !(self.target_percent > 0.0 && self.target_percent <= 100.0) {
            return Err(Error::InvalidArgument(
                "target_percent must lie in (0, 100]".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be positive".into()));
        }
        Ok(())
    }

    /// Same experiment without any shift.
    pub fn unshifted(&self) -> Self {
        let mut c = self.clone();
        c.domain.shift = Shift::default();
        c
    }
}

/// Draws `round(fraction · n)` samples, split between the classes in
/// proportion to their sizes (largest remainder gets the leftover). A class
/// that would round to zero is lifted to one sample, so the draw can only
/// fail when it is smaller than two or the pool lacks a class.
pub fn stratified_subsample(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(
            "subsample fraction must lie in (0, 1]".into(),
        ));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, s) in data.samples().iter().enumerate() {
        by_class[usize::from(!s.label().is_pos())].push(i);
    }
    let total = (fraction * data.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class
        .iter()
        .map(|c| total as f64 * c.len() as f64 / data.len() as f64)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    if take.iter().sum::<usize>() < total {
        let k = if exact[0].fract() >= exact[1].fract() {
            0
        } else {
            1
        };
        take[k] += 1;
    }
    for k in 0..2 {
        if take[k] == 0 && total >= 2 && take[1 - k] > 1 {
            take[k] = 1;
            take[1 - k] -= 1;
        }
    }
    if take.iter().zip(&by_class).any(|(&t, c)| t == 0 || t > c.len()) {
        return Err(Error::DegenerateData(format!(
            "a {:.2}% subsample of {} samples loses a class",
            100.0 * fraction,
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = Vec::with_capacity(total);
    for (class, &t) in by_class.iter_mut().zip(&take) {
        class.shuffle(&mut rng);
        idx.extend_from_slice(&class[..t]);
    }
    idx.sort_unstable();
    Ok(data.subset(&idx))
}

/// Runs every repeat and collects the per-column metrics on the target
/// test split. Adapted forests are checked to be pruned copies of the
/// source forest with unchanged selectors, and Path-Adapt to have changed
/// only thresholds before pruning; a violation is an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cols: Vec<ColumnResult> = ["Src", "Tar100%", "TarX%"]
        .iter()
        .map(|n| ColumnResult {
            name: n.to_string(),
            repeats: Vec::new(),
        })
        .collect();
    for m in [Method::Node, Method::Path, Method::Tree] {
        if cfg.methods.contains(&m) {
            cols.push(ColumnResult {
                name: column_name(m).into(),
                repeats: Vec::new(),
            });
        }
    }
    let mut checks = 0;
    for r in 0..cfg.repeats {
        let r64 = r as u64;
        let domain = DomainSpec {
            seed: cfg.domain.seed.wrapping_add(r64),
            ..cfg.domain.clone()
        };
        let data = generate_domain_pair(&domain)?;
        let s_ta = stratified_subsample(
            &data.target_train,
            cfg.target_percent / 100.0,
            mix_seed(domain.seed, 0x5ab5),
        )?;
        let forest_cfg = ForestConfig {
            seed: mix_seed(cfg.forest.seed, r64),
            ..cfg.forest.clone()
        };
        let src = train_forest(&data.source, &forest_cfg)?;
        let tar_full = train_forest(&data.target_train, &forest_cfg)?;
        let tar_x = train_forest(&s_ta, &forest_cfg)?;
        let test = &data.target_test;
        let mut results = vec![
            evaluate(&src, test)?,
            evaluate(&tar_full, test)?,
            evaluate(&tar_x, test)?,
        ];
        for m in [Method::Node, Method::Path, Method::Tree] {
            if !cfg.methods.contains(&m) {
                continue;
            }
            let adapted = match m {
                Method::Node => {
                    let f = node_adapt(&src, &s_ta, cfg.node, &forest_cfg)?;
                    checks += check_pruned_copy(&f, &src)?;
                    f
                }
                Method::Path => {
                    let paths = export_path_svms(&src, &data.source, &forest_cfg.svm)?;
                    let out = path_adapt_detailed(&src, &paths, &s_ta, cfg.path, &forest_cfg)?;
                    checks += check_pruned_copy(&out.adapted, &src)?;
                    checks += check_pruned_copy(&out.retrained, &src)?;
                    checks += check_thresholds_only(&out.thresholded, &out.retrained.trees)?;
                    out.adapted
                }
                Method::Tree => tree_adapt(&src, &s_ta, cfg.tree, &forest_cfg)?,
            };
            results.push(evaluate(&adapted, test)?);
        }
        for (col, m) in cols.iter_mut().zip(results) {
            col.repeats.push(m);
        }
    }
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        target_percent: cfg.target_percent,
        columns: cols,
        structure_checks: checks,
    })
}

pub fn column_name(m: Method) -> &'static str {
    match m {
        Method::Node => "Node-Adapt",
        Method::Path => "Path-Adapt",
        Method::Tree => "Tree-Adapt",
    }
}

fn structure_error(msg: String) -> Error {
    Error::IncompatibleModel(format!("structure check failed: {msg}"))
}

/// Every tree must map onto its source tree and be no deeper.
fn check_pruned_copy(adapted: &Forest, source: &Forest) -> Result<usize> {
    debug_assert_ne!(adapted.provenance, Provenance::Source);
    if adapted.trees.len() != source.trees.len() {
        return Err(structure_error("tree count changed".into()));
    }
    for (i, (a, s)) in adapted.trees.iter().zip(&source.trees).enumerate() {
        let map = structure_map(a, s).map_err(|e| structure_error(format!("tree {i}: {e}")))?;
        for p in a.paths() {
            let src_len = s
                .paths()
                .iter()
                .filter(|sp| {
                    sp.nodes
                        .starts_with(&p.nodes.iter().map(|&id| map[id]).collect::<Vec<_>>())
                })
                .map(|sp| sp.len())
                .min()
                .unwrap_or(0);
            if p.len() > src_len {
                return Err(structure_error(format!("tree {i}: path deeper than source")));
            }
        }
    }
    Ok(adapted.trees.len())
}

/// Trees must agree in everything but split thresholds.
fn check_thresholds_only(moved: &[Tree], original: &[Tree]) -> Result<usize> {
    for (i, (a, b)) in moved.iter().zip(original).enumerate() {
        let same = a.root == b.root
            && a.nodes.len() == b.nodes.len()
            && a.nodes.iter().zip(&b.nodes).all(|pair| match pair {
                (
                    TreeNode::Split {
                        params: pa,
                        left: la,
                        right: ra,
                    },
                    TreeNode::Split {
                        params: pb,
                        left: lb,
                        right: rb,
                    },
                ) => la == lb && ra == rb && pa.selector == pb.selector && pa.weights == pb.weights,
                (x, y) => x == y,
            });
        if !same {
            return Err(structure_error(format!("tree {i}: more than thresholds changed")));
        }
    }
    Ok(moved.len())
}
