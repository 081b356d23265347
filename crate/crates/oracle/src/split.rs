//! Brute-force entropy and threshold search.

pub fn entropy(pos: usize, neg: usize) -> f64 {
    let n = (pos + neg) as f64;
    let mut h = 0.0;
    for c in [pos, neg] {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

pub fn gain(parent: (usize, usize), left: (usize, usize), right: (usize, usize)) -> f64 {
    let n = (parent.0 + parent.1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let nl = (left.0 + left.1) as f64;
    let nr = (right.0 + right.1) as f64;
    entropy(parent.0, parent.1) - nl / n * entropy(left.0, left.1) - nr / n * entropy(right.0, right.1)
}

/// Exhaustive search over "score + τ ≥ 0 goes left" splits. Candidate τ
/// are negated midpoints of consecutive distinct scores plus one τ that
/// sends everything left. Preference: larger gain (1e-12 slack), then
/// smaller |left − right|, then smaller τ.
pub fn best_threshold(scores: &[f64], labels: &[f64]) -> (f64, f64) {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut candidates = vec![-(distinct[0] - 1.0)];
    for w in distinct.windows(2) {
        candidates.push(-(0.5 * (w[0] + w[1])));
    }
    let parent = count(scores, labels, |_| true);
    let mut best: Option<(f64, f64, usize)> = None;
    for &tau in &candidates {
        let left = count(scores, labels, |s| s + tau >= 0.0);
        let right = (parent.0 - left.0, parent.1 - left.1);
        let g = gain(parent, left, right);
        let imbalance = (left.0 + left.1).abs_diff(right.0 + right.1);
        let better = match best {
            None => true,
            Some((bt, bg, bi)) => {
                if g > bg + 1e-12 {
                    true
                } else if g < bg - 1e-12 {
                    false
                } else if imbalance != bi {
                    imbalance < bi
                } else {
                    tau < bt
                }
            }
        };
        if better {
            best = Some((tau, g, imbalance));
        }
    }
    let (tau, g, _) = best.unwrap();
    (tau, g)
}

fn count(scores: &[f64], labels: &[f64], pred: impl Fn(f64) -> bool) -> (usize, usize) {
    let mut c = (0, 0);
    for (s, y) in scores.iter().zip(labels) {
        if pred(*s) {
            if *y > 0.0 {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
    }
    c
}
