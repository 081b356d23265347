//! Node-Adapt: refit every expert with an adaptive SVM anchored at the
//! source expert, then re-choose its threshold on the target samples.

use crate::data::{Dataset, Label};
use crate::error::{invalid, Result};
use crate::forest::{project, two_sided, Forest, ForestConfig, Provenance, SplitParams};
use crate::optim::{train_adaptive_svm, Hyperplane};

use super::{check_target, rebuild};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeAdaptParams {
    /// Scale of the source expert the adapted expert is pulled toward.
    pub c1: f64,
    /// Slack cost of the adaptive SVM.
    pub c2: f64,
}

impl Default for NodeAdaptParams {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

/// Adapts each tree of `source` to `target` node by node. Selectors are
/// kept; weights come from the adaptive SVM and thresholds from the
/// information-gain search. `cfg` supplies the leaf rules and solver
/// tolerances.
pub fn node_adapt(
    source: &Forest,
    target: &Dataset,
    params: NodeAdaptParams,
    cfg: &ForestConfig,
) -> Result<Forest> {
    cfg.validate()?;
    check_target(source.dim, target)?;
    if !(params.c1 >= 0.0 && params.c1.is_finite() && params.c2 > 0.0 && params.c2.is_finite()) {
        return Err(invalid("node adaptation needs C1 >= 0 and C2 > 0"));
    }
    let trees = source
        .trees
        .iter()
        .map(|tree| {
            rebuild(tree, target, cfg, |_, sp, idx| {
                refit_adaptive(sp, target, idx, params, cfg)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = ForestConfig {
        n_trees: trees.len(),
        ..cfg.clone()
    };
    let mut out = Forest::new(Provenance::NodeAdapt, source.dim, config, trees)?;
    out.params.insert("C1".into(), params.c1);
    out.params.insert("C2".into(), params.c2);
    Ok(out)
}

fn refit_adaptive(
    sp: &SplitParams,
    data: &Dataset,
    idx: &[usize],
    params: NodeAdaptParams,
    cfg: &ForestConfig,
) -> Result<Option<SplitParams>> {
    let x = project(data, idx, |v| {
        sp.selector.apply(v).expect("selector fits dataset")
    });
    let labels: Vec<Label> = idx.iter().map(|&i| data.get(i).label()).collect();
    let anchor = Hyperplane::new(sp.weights.clone(), 0.0);
    let Ok(fit) = train_adaptive_svm(&x, &labels, &anchor, params.c1, params.c2, &cfg.svm) else {
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
