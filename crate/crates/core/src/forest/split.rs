//! Entropy, information gain and the exhaustive threshold search.

use crate::data::{ClassCounts, Label};
use crate::error::{invalid, Result};

/// Base-2 Shannon entropy of a two-class count; `0 log 0 := 0`.
pub fn class_entropy(pos: usize, neg: usize) -> f64 {
    let n = (pos + neg) as f64;
    if pos == 0 || neg == 0 {
        return 0.0;
    }
    let p = pos as f64 / n;
    let q = neg as f64 / n;
    -(p * p.log2() + q * q.log2())
}

/// `H(S) − |Sₗ|/|S|·H(Sₗ) − |Sᵣ|/|S|·H(Sᵣ)`.
pub fn information_gain(parent: ClassCounts, left: ClassCounts, right: ClassCounts) -> Result<f64> {
    if left.pos + right.pos != parent.pos || left.neg + right.neg != parent.neg {
        return Err(invalid(format!(
            "child counts {left:?} + {right:?} do not add up to {parent:?}"
        )));
    }
    Ok(gain_unchecked(parent, left, right))
}

pub(crate) fn gain_unchecked(parent: ClassCounts, left: ClassCounts, right: ClassCounts) -> f64 {
    let n = parent.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let wl = left.total() as f64 / n;
    let wr = right.total() as f64 / n;
    class_entropy(parent.pos, parent.neg)
        - wl * class_entropy(left.pos, left.neg)
        - wr * class_entropy(right.pos, right.neg)
}

/// Outcome of [`best_threshold`]. Samples with `score + threshold ≥ 0`
/// go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub gain: f64,
    pub left: ClassCounts,
    pub right: ClassCounts,
}

/// Gains closer than this are treated as tied.
const GAIN_TIE: f64 = 1e-12;

/// Exhaustive search for the threshold maximizing information gain.
///
/// Candidates are the negated midpoints between consecutive distinct
/// scores plus one threshold that sends every sample left. Ties go to the
/// more balanced split, then to the smaller threshold.
pub fn best_threshold(scores: &[f64], labels: &[Label]) -> Result<ThresholdChoice> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(invalid("scores and labels must be nonempty and of equal length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(crate::Error::NonFinite("split scores"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // descending, so that prefixes are the left side
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut parent = ClassCounts::default();
    for &l in labels {
        parent.add(l);
    }
    let n = scores.len();
    let lowest = scores[order[n - 1]];
    let mut best = ThresholdChoice {
        threshold: -(lowest - 1.0),
        gain: 0.0,
        left: parent,
        right: ClassCounts::default(),
    };
    let mut best_imbalance = n;

    let mut left = ClassCounts::default();
    for q in 0..n - 1 {
        left.add(labels[order[q]]);
        let (hi, lo) = (scores[order[q]], scores[order[q + 1]]);
        if hi == lo {
            continue;
        }
        let mut mid = 0.5 * (hi + lo);
        if mid <= lo {
            mid = hi;
        }
        let right = ClassCounts::new(parent.pos - left.pos, parent.neg - left.neg);
        let gain = gain_unchecked(parent, left, right);
        let imbalance = left.total().abs_diff(right.total());
        let tau = -mid;
        let better = if gain > best.gain + GAIN_TIE {
            true
        } else if gain < best.gain - GAIN_TIE {
            false
        } else if imbalance != best_imbalance {
            imbalance < best_imbalance
        } else {
            tau < best.threshold
        };
        if better {
            best = ThresholdChoice {
                threshold: tau,
                gain,
                left,
                right,
            };
            best_imbalance = imbalance;
        }
    }
    Ok(best)
}
