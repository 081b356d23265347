//! Solver outputs against the reference dual solvers in `rfda-oracle`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfda_core::data::Label;
use rfda_core::optim::{
    adaptive_svm_objective, solve_threshold_qp, svm_objective, train_adaptive_svm, train_linear_svm,
    train_linear_svm_no_bias, DenseRows, Hyperplane, QpConstraint, SvmConfig, ThresholdQpProblem,
};
use rfda_oracle::solvers as oracle;

fn labels(y: &[f64]) -> Vec<Label> {
    y.iter()
        .map(|&s| if s > 0.0 { Label::Pos } else { Label::Neg })
        .collect()
}

fn random_svm_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let n = rng.random_range(4..=30);
    let d = rng.random_range(1..=5);
    let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xk| {
                let s: f64 = xk.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.3;
                let flip = rng.random_bool(0.15);
                if (s >= 0.0) ^ flip {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            let c = 10f64.powf(rng.random_range(-1.0..1.0));
            return (x, y, c);
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn cfg(cost: f64) -> SvmConfig {
    SvmConfig {
        reg_cost: cost,
        ..SvmConfig::default()
    }
}

#[test]
fn linear_svm_hard_margin_1d() {
    let x = DenseRows::from_rows(1, &[vec![-1.0], vec![1.0]]);
    let fit = train_linear_svm(&x, &[Label::Neg, Label::Pos], &cfg(1e3)).unwrap();
    assert!((fit.hyperplane.weights[0] - 1.0).abs() < 1e-3, "{fit:?}");
    assert!(fit.hyperplane.bias.abs() < 1e-3);
    let reference = oracle::svm_with_bias(&[vec![-1.0], vec![1.0]], &[-1.0, 1.0], 1e3);
    assert!((reference.solution[0] - 1.0).abs() < 1e-6);
}

#[test]
fn duplicated_samples_match_rescaled_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (x, y, c) = random_svm_instance(&mut rng);
        let d = x[0].len();
        let base = train_linear_svm(&DenseRows::from_rows(d, &x), &labels(&y), &cfg(10.0 * c)).unwrap();
        let (mut xd, mut yd) = (Vec::new(), Vec::new());
        for _ in 0..10 {
            xd.extend(x.iter().cloned());
            yd.extend(y.iter().copied());
        }
        let dup = train_linear_svm(&DenseRows::from_rows(d, &xd), &labels(&yd), &cfg(c)).unwrap();
        assert!(max_abs_diff(&base.hyperplane.weights, &dup.hyperplane.weights) < 1e-5);
        let ob = oracle::svm_objective(&x, &y, &base.hyperplane.weights, base.hyperplane.bias, 10.0 * c);
        let od = oracle::svm_objective(&xd, &yd, &dup.hyperplane.weights, dup.hyperplane.bias, c);
        assert!((ob - od).abs() <= 1e-4 * ob.max(1.0), "{ob} {od}");
    }
}

#[test]
fn single_class_is_degenerate() {
    let x = DenseRows::from_rows(1, &[vec![1.0], vec![2.0]]);
    let err = train_linear_svm(&x, &[Label::Pos, Label::Pos], &cfg(1.0)).unwrap_err();
    assert!(matches!(err, rfda_core::Error::DegenerateData(_)));
    let src = Hyperplane::new(vec![1.0], 0.0);
    assert!(train_adaptive_svm(&x, &[Label::Neg, Label::Neg], &src, 1.0, 1.0, &cfg(1.0)).is_err());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let x = DenseRows::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let src = Hyperplane::new(vec![1.0], 0.0);
    assert!(matches!(
        train_adaptive_svm(&x, &[Label::Pos, Label::Neg], &src, 1.0, 1.0, &cfg(1.0)),
        Err(rfda_core::Error::DimensionMismatch { .. })
    ));
}

#[test]
fn linear_svm_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let (x, y, c) = random_svm_instance(&mut rng);
        let rows = DenseRows::from_rows(x[0].len(), &x);
        let fit = train_linear_svm(&rows, &labels(&y), &cfg(c)).unwrap();
        let reference = oracle::svm_with_bias(&x, &y, c);
        let ours = svm_objective(&rows, &labels(&y), &fit.hyperplane, c);
        assert!(
            ours <= reference.objective + 1e-4 * reference.objective.abs().max(1.0),
            "case {case}: {ours} vs {}",
            reference.objective
        );
        let dw = max_abs_diff(&fit.hyperplane.weights, &reference.solution);
        assert!(
            dw < 1e-5,
            "case {case}: weight gap {dw} fit {fit:?} ref {reference:?} ours {ours}"
        );
    }
}

#[test]
fn adaptive_svm_with_zero_c1_is_plain_svm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (x, y, c) = random_svm_instance(&mut rng);
        let d = x[0].len();
        let rows = DenseRows::from_rows(d, &x);
        let src = Hyperplane::new((0..d).map(|_| rng.random_range(-3.0..3.0)).collect(), 0.0);
        let a = train_adaptive_svm(&rows, &labels(&y), &src, 0.0, c, &cfg(1.0)).unwrap();
        let b = train_linear_svm_no_bias(&rows, &labels(&y), &cfg(c)).unwrap();
        assert!(max_abs_diff(&a.hyperplane.weights, &b.hyperplane.weights) < 1e-6);
    }
}

#[test]
fn adaptive_svm_keeps_a_satisfying_source() {
    let x = DenseRows::from_rows(
        2,
        &[vec![2.0, 1.0], vec![1.5, -0.5], vec![-2.0, 0.0], vec![-1.0, -3.0]],
    );
    let y = [Label::Pos, Label::Pos, Label::Neg, Label::Neg];
    let src = Hyperplane::new(vec![1.0, 0.0], 0.0);
    let fit = train_adaptive_svm(&x, &y, &src, 1.0, 1.0, &cfg(1.0)).unwrap();
    assert!(max_abs_diff(&fit.hyperplane.weights, &src.weights) <= 1e-6);
}

#[test]
fn adaptive_svm_small_instance_matches_reference() {
    let x = vec![
        vec![1.0, 2.0],
        vec![2.0, 0.5],
        vec![0.5, -1.0],
        vec![-1.0, -0.5],
        vec![-2.0, 1.0],
        vec![0.2, 0.1],
    ];
    let y = vec![1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
    let src = [0.5, 1.5];
    let reference = oracle::adaptive_svm(&x, &y, &src, 1.0, 1.0);
    let fit = train_adaptive_svm(
        &DenseRows::from_rows(2, &x),
        &labels(&y),
        &Hyperplane::new(src.to_vec(), 0.0),
        1.0,
        1.0,
        &cfg(1.0),
    )
    .unwrap();
    assert!(max_abs_diff(&fit.hyperplane.weights, &reference.solution) < 1e-5);
}

#[test]
fn adaptive_svm_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..200 {
        let (x, y, c2) = random_svm_instance(&mut rng);
        let d = x[0].len();
        let src: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c1 = rng.random_range(0.0..2.0);
        let rows = DenseRows::from_rows(d, &x);
        let fit = train_adaptive_svm(
            &rows,
            &labels(&y),
            &Hyperplane::new(src.clone(), 0.0),
            c1,
            c2,
            &cfg(1.0),
        )
        .unwrap();
        let reference = oracle::adaptive_svm(&x, &y, &src, c1, c2);
        let ours = adaptive_svm_objective(&rows, &labels(&y), &fit.hyperplane.weights, &src, c1, c2);
        assert!(
            ours <= reference.objective + 1e-4 * reference.objective.abs().max(1.0),
            "case {case}"
        );
        let dw = max_abs_diff(&fit.hyperplane.weights, &reference.solution);
        assert!(dw < 1e-5, "case {case}: {dw}");
    }
}

#[test]
fn adaptive_svm_reduction_identity() {
    // solving in ψ' = ψ − c1 ψˢ with shifted margins and adding c1 ψˢ back
    use rfda_core::optim::solve_margin_svm;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let (x, y, c2) = random_svm_instance(&mut rng);
        let d = x[0].len();
        let src: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c1 = rng.random_range(0.0..2.0);
        let rows = DenseRows::from_rows(d, &x);
        let fit = train_adaptive_svm(
            &rows,
            &labels(&y),
            &Hyperplane::new(src.clone(), 0.0),
            c1,
            c2,
            &cfg(1.0),
        )
        .unwrap();
        let targets: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xk, yk)| 1.0 - c1 * yk * xk.iter().zip(&src).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let shifted = solve_margin_svm(&rows, &y, &targets, c2, &cfg(1.0));
        let back: Vec<f64> = shifted
            .weights
            .iter()
            .zip(&src)
            .map(|(w, s)| w + c1 * s)
            .collect();
        assert!(max_abs_diff(&back, &fit.hyperplane.weights) <= 1e-10);
    }
}

fn random_qp(rng: &mut ChaCha8Rng) -> (ThresholdQpProblem, Vec<oracle::PathRow>) {
    let n = rng.random_range(1..=20);
    let prior: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n_paths = rng.random_range(1..=4);
    let m = rng.random_range(1..=8);
    let mut constraints = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..n_paths {
        let len = rng.random_range(1..=n.min(5));
        let mut ids: Vec<usize> = (0..n).collect();
        for i in 0..len {
            let j = rng.random_range(i..n);
            ids.swap(i, j);
        }
        ids.truncate(len);
        let weights: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bias = rng.random_range(-1.0..1.0);
        for _ in 0..m {
            let fixed: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            constraints.push(QpConstraint {
                path_node_ids: ids.clone(),
                fixed_scores: fixed.clone(),
                path_weights: weights.clone(),
                path_bias: bias,
                label: labels(&[label])[0],
            });
            rows.push(oracle::PathRow {
                ids: ids.clone(),
                fixed,
                weights: weights.clone(),
                bias,
                label,
            });
        }
    }
    let penalty = 10f64.powf(rng.random_range(-1.0..1.0));
    let problem = ThresholdQpProblem {
        n_thresholds: n,
        prior_thresholds: prior,
        constraints,
        penalty,
        solver: SvmConfig::default(),
    };
    (problem, rows)
}

#[test]
fn threshold_qp_with_zero_penalty_returns_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..50 {
        let (mut p, _) = random_qp(&mut rng);
        p.penalty = 0.0;
        let sol = solve_threshold_qp(&p).unwrap();
        assert_eq!(sol.thresholds, p.prior_thresholds);
    }
}

#[test]
fn threshold_qp_keeps_feasible_prior() {
    let p = ThresholdQpProblem {
        n_thresholds: 2,
        prior_thresholds: vec![0.5, -0.25],
        constraints: vec![QpConstraint {
            path_node_ids: vec![0, 1],
            fixed_scores: vec![1.0, 1.0],
            path_weights: vec![1.0, 1.0],
            path_bias: 0.0,
            label: Label::Pos,
        }],
        penalty: 1.0,
        solver: SvmConfig::default(),
    };
    assert_eq!(solve_threshold_qp(&p).unwrap().thresholds, p.prior_thresholds);
}

#[test]
fn threshold_qp_single_violated_constraint() {
    // y=+1, W=(1,2), fixed=(0,0), b=-1, prior=(0,0): value −1 < 0.
    // Minimizing ½‖u‖² + max(0, 1 − u₀ − 2u₁) gives u = (1,2)/5.
    let p = ThresholdQpProblem {
        n_thresholds: 2,
        prior_thresholds: vec![0.0, 0.0],
        constraints: vec![QpConstraint {
            path_node_ids: vec![0, 1],
            fixed_scores: vec![0.0, 0.0],
            path_weights: vec![1.0, 2.0],
            path_bias: -1.0,
            label: Label::Pos,
        }],
        penalty: 1.0,
        solver: SvmConfig::default(),
    };
    let sol = solve_threshold_qp(&p).unwrap();
    let rows = vec![oracle::PathRow {
        ids: vec![0, 1],
        fixed: vec![0.0, 0.0],
        weights: vec![1.0, 2.0],
        bias: -1.0,
        label: 1.0,
    }];
    let reference = oracle::threshold_qp(&[0.0, 0.0], &rows, 1.0);
    assert!(max_abs_diff(&sol.thresholds, &reference.solution) < 1e-5);
    assert!(max_abs_diff(&sol.thresholds, &[0.2, 0.4]) < 1e-9);
}

#[test]
fn threshold_qp_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..200 {
        let (p, rows) = random_qp(&mut rng);
        let sol = solve_threshold_qp(&p).unwrap();
        let reference = oracle::threshold_qp(&p.prior_thresholds, &rows, p.penalty);
        let ours = p.objective(&sol.thresholds);
        assert!(
            ours <= reference.objective + 1e-4 * reference.objective.abs().max(1.0),
            "case {case}"
        );
        let db = max_abs_diff(&sol.thresholds, &reference.solution);
        assert!(db < 1e-5, "case {case}: {db}");
    }
}

#[test]
fn solutions_are_coordinatewise_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let h = 1e-4;
    for _ in 0..50 {
        let (x, y, c) = random_svm_instance(&mut rng);
        let rows = DenseRows::from_rows(x[0].len(), &x);
        let ly = labels(&y);
        let fit = train_linear_svm(&rows, &ly, &cfg(c)).unwrap();
        let base = svm_objective(&rows, &ly, &fit.hyperplane, c);
        let d = x[0].len();
        for j in 0..=d {
            for delta in [h, -h] {
                let mut moved = fit.hyperplane.clone();
                if j < d {
                    moved.weights[j] += delta;
                } else {
                    moved.bias += delta;
                }
                assert!(svm_objective(&rows, &ly, &moved, c) >= base - 1e-6);
            }
        }

        let (p, _) = random_qp(&mut rng);
        let sol = solve_threshold_qp(&p).unwrap();
        let base = p.objective(&sol.thresholds);
        for j in 0..p.n_thresholds {
            for delta in [h, -h] {
                let mut moved = sol.thresholds.clone();
                moved[j] += delta;
                assert!(p.objective(&moved) >= base - 1e-6);
            }
        }
    }
}

#[test]
fn solvers_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (x, y, c) = random_svm_instance(&mut rng);
    let rows = DenseRows::from_rows(x[0].len(), &x);
    let a = train_linear_svm(&rows, &labels(&y), &cfg(c)).unwrap();
    let b = train_linear_svm(&rows, &labels(&y), &cfg(c)).unwrap();
    assert_eq!(a, b);
    let (p, _) = random_qp(&mut rng);
    assert_eq!(solve_threshold_qp(&p).unwrap(), solve_threshold_qp(&p).unwrap());
}

#[test]
fn qp_json_dump_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (p, _) = random_qp(&mut rng);
    let back: ThresholdQpProblem = serde_json::from_str(&p.to_json().unwrap()).unwrap();
    assert_eq!(back, p);
}
