//! Miss rate versus false-positive rate, summarized over eleven
//! log-spaced operating points, plus AUC and the 0.5-threshold error.

use serde::{Deserialize, Serialize};

use rfda_core::data::{Dataset, Label};
use rfda_core::error::{Error, Result};
use rfda_core::forest::Forest;

/// `10^(−2 + 0.2 i)` for `i = 0..=10`: log-spaced over `[0.01, 1]`.
pub const FPR_TARGETS: [f64; 11] = [
    0.01,
    0.015848931924611134,
    0.025118864315095794,
    0.039810717055349734,
    0.06309573444801933,
    0.1,
    0.15848931924611134,
    0.251188643150958,
    0.3981071705534972,
    0.6309573444801932,
    1.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean of `miss_rates`.
    pub avg_miss_rate: f64,
    /// Miss rate at each of [`FPR_TARGETS`].
    pub miss_rates: Vec<f64>,
    pub auc: f64,
    pub error_rate: f64,
}

/// Scores `test` with the forest posterior and summarizes it.
pub fn evaluate(forest: &Forest, test: &Dataset) -> Result<MetricsReport> {
    let scores = forest.posteriors(test)?;
    let labels: Vec<Label> = test.samples().iter().map(|s| s.label()).collect();
    metrics_from_scores(&scores, &labels)
}

/// Metrics of a scorer that calls a sample positive when its score is at
/// least the operating threshold.
///
/// For each target FPR the threshold is chosen conservatively: the
/// smallest achievable FPR not below the target, and among thresholds
/// achieving it the one with the fewest misses.
pub fn metrics_from_scores(scores: &[f64], labels: &[Label]) -> Result<MetricsReport> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("one score per label required".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|l| l.is_pos()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateData(
            "evaluation needs samples of both classes".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // operating points (false positives, true positives), strictest first
    let mut points = vec![(0usize, 0usize)];
    let (mut fp, mut tp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i].is_pos() {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push((fp, tp));
        }
    }

    let miss_rates: Vec<f64> = FPR_TARGETS
        .iter()
        .map(|&target| {
            let mut best: Option<(usize, usize)> = None;
            for &(fp, tp) in &points {
                let fpr = fp as f64 / n_neg as f64;
                if fpr < target * (1.0 - 1e-12) {
                    continue;
                }
                best = match best {
                    Some((bfp, btp)) if bfp < fp || (bfp == fp && btp >= tp) => Some((bfp, btp)),
                    _ => Some((fp, tp)),
                };
            }
            let (_, tp) = best.expect("the all-positive point reaches FPR 1");
            1.0 - tp as f64 / n_pos as f64
        })
        .collect();
    let avg_miss_rate = miss_rates.iter().sum::<f64>() / miss_rates.len() as f64;

    let wrong = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| (**s >= 0.5) != l.is_pos())
        .count();
    Ok(MetricsReport {
        avg_miss_rate,
        miss_rates,
        auc: auc(scores, labels, &order, n_pos, n_neg),
        error_rate: wrong as f64 / scores.len() as f64,
    })
}

/// Mann-Whitney AUC with tied scores counted as one half.
fn auc(scores: &[f64], labels: &[Label], desc: &[usize], n_pos: usize, n_neg: usize) -> f64 {
    // walk ascending so that each positive counts the negatives below it
    let mut wins = 0.0;
    let mut neg_below = 0usize;
    let mut k = desc.len();
    while k > 0 {
        let s = scores[desc[k - 1]];
        let mut start = k;
        while start > 0 && scores[desc[start - 1]] == s {
            start -= 1;
        }
        let group = &desc[start..k];
        let pos = group.iter().filter(|&&i| labels[i].is_pos()).count();
        let neg = group.len() - pos;
        wins += pos as f64 * (neg_below as f64 + 0.5 * neg as f64);
        neg_below += neg;
        k = start;
    }
    wins / (n_pos as f64 * n_neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[i8]) -> Vec<Label> {
        v.iter()
            .map(|&x| if x > 0 { Label::Pos } else { Label::Neg })
            .collect()
    }

    #[test]
    fn targets_are_log_spaced() {
        for (i, t) in FPR_TARGETS.iter().enumerate() {
            let expected = 10f64.powf(-2.0 + 0.2 * i as f64);
            assert!((t - expected).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn perfect_scorer_has_no_misses() {
        let y = labels(&[1, 1, -1, -1, 1]);
        let s = [0.99, 0.98, 0.01, 0.02, 0.97];
        let m = metrics_from_scores(&s, &y).unwrap();
        assert_eq!(m.avg_miss_rate, 0.0);
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.error_rate, 0.0);
    }

    #[test]
    fn constant_scorer_is_a_coin() {
        let y = labels(&[1, -1, 1, -1, -1]);
        let m = metrics_from_scores(&[0.3; 5], &y).unwrap();
        assert_eq!(m.auc, 0.5);
        assert!(m.miss_rates.iter().all(|&r| r == 0.0));
        assert_eq!(m.error_rate, 0.4);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(metrics_from_scores(&[0.1, 0.2], &labels(&[1, 1])).is_err());
    }
}
