use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rfda_core::data::{Dataset, FeatureSelector, Label};
use rfda_core::forest::*;
use rfda_core::optim::{BiasMode, SvmConfig};
use rfda_core::Error;

fn fast_cfg() -> ForestConfig {
    ForestConfig {
        n_trees: 1,
        max_depth: 4,
        candidates: 10,
        svm: SvmConfig {
            tol: 1e-2,
            bias: BiasMode::Penalized,
            ..SvmConfig::default()
        },
        ..ForestConfig::default()
    }
}

fn blobs(n: usize, dim: usize, sep: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let pos = i % 2 == 0;
        let shift = if pos { sep / 2.0 } else { -sep / 2.0 };
        rows.push((0..dim).map(|_| noise.sample(&mut rng) + shift).collect());
        labels.push(if pos { Label::Pos } else { Label::Neg });
    }
    Dataset::from_rows(rows, labels).unwrap()
}

fn leaf(p: f64) -> TreeNode {
    TreeNode::Leaf {
        posterior_pos: p,
        sample_count: 1,
    }
}

fn stump(selector: FeatureSelector, weights: Vec<f64>, tau: f64, l: f64, r: f64) -> Tree {
    Tree {
        root: 0,
        max_depth: 2,
        origin: None,
        nodes: vec![
            TreeNode::Split {
                params: SplitParams::new(selector, weights, tau).unwrap(),
                left: 1,
                right: 2,
            },
            leaf(l),
            leaf(r),
        ],
    }
}

fn forest_of(dim: usize, trees: Vec<Tree>) -> Forest {
    Forest::new(Provenance::Source, dim, ForestConfig::default(), trees).unwrap()
}

#[test]
fn best_threshold_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..500 {
        let n = rng.random_range(1..=40);
        // coarse grids force ties between scores
        let grid = [0.0, 2.0, 8.0, 1e6][case % 4];
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(-3.0..3.0);
                if grid > 0.0 {
                    (s * grid).round() / grid
                } else {
                    s
                }
            })
            .collect();
        let labels: Vec<Label> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let signs: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let got = best_threshold(&scores, &labels).unwrap();
        let (tau, gain) = rfda_oracle::split::best_threshold(&scores, &signs);
        assert_eq!(got.threshold, tau, "case {case}: {scores:?} {signs:?}");
        assert!((got.gain - gain).abs() < 1e-12, "case {case}");
        let left = scores.iter().filter(|s| *s + got.threshold >= 0.0).count();
        assert_eq!(left, got.left.total());
    }
}

#[test]
fn train_node_purifies_separable_data() {
    let data = blobs(60, 4, 20.0, 3);
    let cfg = ForestConfig {
        candidates: 1,
        block_fraction: 1.0,
        ..ForestConfig::default()
    };
    let split = train_node(&data, &cfg, 5).unwrap();
    let c = data.counts();
    assert!((split.gain - class_entropy(c.pos, c.neg)).abs() < 1e-12);
    assert_eq!(split.params.selector.indices(), &[0, 1, 2, 3]);
    assert_eq!(split, train_node(&data, &cfg, 5).unwrap());
}

#[test]
fn train_node_rejects_single_class() {
    let data = Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![Label::Pos; 2]).unwrap();
    assert!(matches!(
        train_node(&data, &ForestConfig::default(), 0),
        Err(Error::DegenerateData(_))
    ));
}

#[test]
fn depth_one_is_a_single_leaf() {
    let data = blobs(30, 2, 1.0, 1);
    let cfg = ForestConfig {
        max_depth: 1,
        ..fast_cfg()
    };
    let tree = grow_tree(&data, &cfg, 0).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    let c = data.counts();
    let expected = (c.pos as f64 + 1.0) / (c.total() as f64 + 2.0);
    assert_eq!(tree_posterior(&tree, &[0.0, 0.0]).unwrap(), expected);
}

#[test]
fn pure_data_is_a_single_leaf() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let data = Dataset::from_rows(rows, vec![Label::Pos; 10]).unwrap();
    let tree = grow_tree(&data, &fast_cfg(), 0).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree_posterior(&tree, &[3.0]).unwrap(), 11.0 / 12.0);
}

#[test]
fn grow_tree_rejects_empty_data() {
    let data = Dataset::new(2, vec![]).unwrap();
    assert!(grow_tree(&data, &fast_cfg(), 0).is_err());
}

#[test]
fn xor_with_unequal_quadrants_is_learned_at_depth_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (qx, qy, count) in [
        (1.0, 1.0, 150),
        (-1.0, -1.0, 90),
        (1.0, -1.0, 120),
        (-1.0, 1.0, 60),
    ] {
        for _ in 0..count {
            let x: f64 = qx * rng.random_range(0.1..1.0);
            let y: f64 = qy * rng.random_range(0.1..1.0);
            rows.push(vec![x, y]);
            labels.push(if qx * qy > 0.0 { Label::Pos } else { Label::Neg });
        }
    }
    let data = Dataset::from_rows(rows, labels).unwrap();
    let cfg = ForestConfig {
        max_depth: 3,
        ..ForestConfig::default()
    };
    let forest = Forest::new(
        Provenance::Source,
        2,
        cfg.clone(),
        vec![grow_tree(&data, &cfg, 0).unwrap()],
    )
    .unwrap();
    let err = forest.error_rate(&data).unwrap();
    assert!(err < 0.05, "training error {err}");
}

#[test]
fn single_tree_forest_matches_its_tree() {
    let data = blobs(200, 3, 2.0, 4);
    let forest = train_forest(&data, &fast_cfg()).unwrap();
    for s in data.samples() {
        assert_eq!(
            forest.posterior(s.features()).unwrap(),
            tree_posterior(&forest.trees[0], s.features()).unwrap()
        );
    }
}

#[test]
fn training_is_byte_identical_across_runs() {
    let data = blobs(200, 4, 2.0, 5);
    let cfg = ForestConfig {
        n_trees: 3,
        ..fast_cfg()
    };
    let a = train_forest(&data, &cfg).unwrap().to_json().unwrap();
    let b = train_forest(&data, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn separable_blobs_have_low_test_error() {
    let train = blobs(400, 6, 4.0, 6);
    let test = blobs(1000, 6, 4.0, 7);
    let cfg = ForestConfig {
        n_trees: 10,
        ..fast_cfg()
    };
    let forest = train_forest(&train, &cfg).unwrap();
    let err = forest.error_rate(&test).unwrap();
    assert!(err < 0.05, "test error {err}");
}

#[test]
fn routing_examples() {
    let sel = FeatureSelector::block(0, 1).unwrap();
    let t = stump(sel, vec![1.0], -0.5, 0.9, 0.2);
    assert_eq!(tree_posterior(&t, &[1.0]).unwrap(), 0.9);
    assert_eq!(tree_posterior(&t, &[0.5]).unwrap(), 0.9);
    assert_eq!(tree_posterior(&t, &[0.4]).unwrap(), 0.2);
    assert!(matches!(
        forest_of(2, vec![t.clone()]).posterior(&[1.0]),
        Err(Error::DimensionMismatch { .. })
    ));
    let single = Tree::leaf(0.7, 5, 3);
    assert_eq!(tree_posterior(&single, &[123.0, -4.0]).unwrap(), 0.7);
}

#[test]
fn forest_posterior_and_classify_examples() {
    let f = forest_of(1, vec![Tree::leaf(0.8, 1, 1), Tree::leaf(0.4, 1, 1)]);
    assert!((forest_posterior(&f, &[0.0]).unwrap() - 0.6).abs() < 1e-15);
    assert_eq!(classify(&f, &[0.0], 0.5).unwrap(), Label::Pos);

    let half = forest_of(1, vec![Tree::leaf(0.5, 1, 1)]);
    assert_eq!(classify(&half, &[0.0], 0.5).unwrap(), Label::Pos);
    let below = forest_of(1, vec![Tree::leaf(0.49, 1, 1)]);
    assert_eq!(classify(&below, &[0.0], 0.5).unwrap(), Label::Neg);

    let same = forest_of(1, vec![Tree::leaf(0.3, 1, 1); 4]);
    assert_eq!(forest_posterior(&same, &[0.0]).unwrap(), 0.3);
}

#[test]
fn forest_posterior_is_the_mean_of_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 5;
    let trees: Vec<Tree> = (0..100)
        .map(|_| {
            let start = rng.random_range(0..dim - 1);
            let sel = FeatureSelector::block(start, 2).unwrap();
            let w = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            stump(sel, w, rng.random_range(-0.5..0.5), rng.random(), rng.random())
        })
        .collect();
    let f = forest_of(dim, trees);
    for _ in 0..50 {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut acc = 0.0;
        for t in &f.trees {
            let TreeNode::Split { params, left, right } = &t.nodes[0] else {
                unreachable!()
            };
            let s: f64 = params
                .selector
                .indices()
                .iter()
                .zip(&params.weights)
                .map(|(&i, w)| w * v[i])
                .sum();
            let id = if s + params.threshold >= 0.0 {
                *left
            } else {
                *right
            };
            let TreeNode::Leaf { posterior_pos, .. } = t.nodes[id] else {
                unreachable!()
            };
            acc += posterior_pos;
        }
        let p = f.posterior(&v).unwrap();
        assert!((p - acc / 100.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn trained_forests_keep_structural_invariants() {
    let data = blobs(300, 5, 1.5, 12);
    let cfg = ForestConfig {
        n_trees: 4,
        max_depth: 5,
        min_samples: 4,
        ..fast_cfg()
    };
    let forest = train_forest(&data, &cfg).unwrap();
    for t in &forest.trees {
        assert!(t.depth() <= cfg.max_depth);
        for p in t.paths() {
            assert!(p.len() < cfg.max_depth);
        }
        for n in &t.nodes {
            if let TreeNode::Leaf { posterior_pos, .. } = n {
                assert!(*posterior_pos > 0.0 && *posterior_pos < 1.0);
            }
        }
    }
}

#[test]
fn serialization_round_trip_preserves_posteriors() {
    let data = blobs(300, 5, 1.5, 13);
    let cfg = ForestConfig {
        n_trees: 5,
        ..fast_cfg()
    };
    let forest = train_forest(&data, &cfg).unwrap();
    let back = Forest::from_json(&forest.to_json().unwrap()).unwrap();
    assert_eq!(back, forest);
    assert_eq!(back.fingerprint(), forest.fingerprint());
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
        assert_eq!(
            back.posterior(&v).unwrap().to_bits(),
            forest.posterior(&v).unwrap().to_bits()
        );
    }
}

#[test]
fn malformed_model_files_are_rejected() {
    let f = forest_of(1, vec![Tree::leaf(0.5, 1, 1)]);
    let json = f.to_json().unwrap();
    assert!(Forest::from_json(&json.replace("\"format_version\": 1", "\"format_version\": 9")).is_err());
    assert!(Forest::from_json(&json.replace("0.5", "1.5")).is_err());
    assert!(Forest::from_json("{}").is_err());
}

#[test]
fn penalized_bias_is_close_to_exact_on_easy_data() {
    let data = blobs(200, 2, 3.0, 15);
    let cfg = ForestConfig {
        candidates: 1,
        block_fraction: 1.0,
        ..ForestConfig::default()
    };
    let exact = train_node(&data, &cfg, 0).unwrap();
    let fast = train_node(
        &data,
        &ForestConfig {
            svm: fast_cfg().svm,
            ..cfg
        },
        0,
    )
    .unwrap();
    assert!((exact.gain - fast.gain).abs() < 0.05);
}
