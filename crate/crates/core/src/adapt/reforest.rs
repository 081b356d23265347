//! Tree-Adapt: replace a random share of the source trees with trees
//! grown on the target samples.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{mix_seed, Dataset};
use crate::error::{invalid, Result};
use crate::forest::{grow_tree, Forest, ForestConfig, Provenance, TreeOrigin};

use super::check_target;

/// Salt separating the slot draw from the tree seeds.
const SLOT_SALT: u64 = 0x7265_666f_7265_7374;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeAdaptParams {
    /// Share of trees to replace, in (0, 1].
    pub ratio: f64,
}

impl Default for TreeAdaptParams {
    fn default() -> Self {
        Self { ratio: 0.5 }
    }
}

/// Replaces `round(ratio · T)` (halves rounded up) uniformly drawn tree
/// slots with trees grown on `target`. The tree in slot `i` is grown with
/// seed `cfg.seed + i`, so `ratio = 1` reproduces `train_forest(target)`.
/// Every output tree is tagged with its origin.
pub fn tree_adapt(
    source: &Forest,
    target: &Dataset,
    params: TreeAdaptParams,
    cfg: &ForestConfig,
) -> Result<Forest> {
    cfg.validate()?;
    check_target(source.dim, target)?;
    let ratio = params.ratio;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(invalid(format!(
            "replacement ratio must lie in (0, 1], got {ratio}"
        )));
    }
    let t = source.trees.len();
    let count = (ratio * t as f64 + 0.5).floor() as usize;
    if count == 0 {
        return Err(invalid(format!(
            "ratio {ratio} replaces no tree of a {t}-tree forest"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SLOT_SALT));
    let mut slots = index::sample(&mut rng, t, count.min(t)).into_vec();
    slots.sort_unstable();

    let mut trees = source.trees.clone();
    for tree in &mut trees {
        tree.origin = Some(TreeOrigin::Source);
    }
    for &i in &slots {
        let mut fresh = grow_tree(target, cfg, cfg.seed.wrapping_add(i as u64))?;
        fresh.origin = Some(TreeOrigin::Target);
        trees[i] = fresh;
    }
    let config = ForestConfig {
        n_trees: t,
        ..cfg.clone()
    };
    let mut out = Forest::new(Provenance::TreeAdapt, source.dim, config, trees)?;
    out.params.insert("C".into(), ratio);
    Ok(out)
}
