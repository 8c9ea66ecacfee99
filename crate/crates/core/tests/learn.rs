use hasprof_core::eval::{cross_validate, kfold_split, out_of_fold_predictions};
use hasprof_core::learn::{
    oob_error, permutation_importance, Bootstrap, ForestModel, ForestParams, KnnModel, KnnParams, TreeModel, TreeParams,
};
use hasprof_core::{Classifier, Dataset, ModelSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Three Gaussian classes in the first two features, the rest noise; some
/// columns are rounded so that ties and duplicate rows occur.
fn blobs(n: usize, extra: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let names: Vec<String> = (0..2 + extra).map(|i| format!("f{i}")).collect();
    let mut ds = Dataset::new(names, ["a", "b", "c"]);
    let centers = [(0.0, 0.0), (2.5, 0.5), (1.0, 2.5)];
    for i in 0..n {
        let y = i % 3;
        let mut x = vec![centers[y].0 + noise.sample(&mut rng), centers[y].1 + noise.sample(&mut rng)];
        for j in 0..extra {
            let v: f64 = noise.sample(&mut rng) * (j + 1) as f64;
            x.push(if j % 2 == 0 { v.round() } else { v });
        }
        ds.push(&x, y, None).unwrap();
    }
    for i in (0..n).step_by(17) {
        let row = ds.row(i).to_vec();
        ds.push(&row, (ds.label(i) + 1) % 3, None).unwrap();
    }
    ds
}

fn majority_lowest(votes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

/// Brute force: population z-scores, squared Euclidean distance, stable sort.
fn knn_oracle(ds: &Dataset, k: usize, q: &[f64]) -> usize {
    let (n, m) = (ds.n_rows(), ds.n_features());
    let mut mean = vec![0.0; m];
    let mut sd = vec![0.0; m];
    for j in 0..m {
        mean[j] = (0..n).map(|i| ds.value(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (ds.value(i, j) - mean[j]).powi(2)).sum::<f64>() / n as f64;
        sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let z = |x: &[f64]| -> Vec<f64> { (0..m).map(|j| (x[j] - mean[j]) / sd[j]).collect() };
    let zq = z(q);
    let mut d: Vec<(f64, usize)> =
        (0..n).map(|i| (z(ds.row(i)).iter().zip(&zq).map(|(a, b)| (a - b) * (a - b)).sum(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut votes = vec![0; ds.n_classes()];
    for &(_, i) in &d[..k] {
        votes[ds.label(i)] += 1;
    }
    majority_lowest(&votes)
}

#[test]
fn knn_matches_brute_force() {
    let ds = blobs(300, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [1, 2, 3, 4, 7, 15] {
        let model = KnnModel::train(&ds, &KnnParams { k }).unwrap();
        for t in 0..200 {
            // half the probes sit exactly on training rows, where ties abound
            let q: Vec<f64> = if t % 2 == 0 {
                ds.row(rng.random_range(0..ds.n_rows())).to_vec()
            } else {
                (0..ds.n_features()).map(|_| rng.random_range(-3.0..4.0f64).round()).collect()
            };
            assert_eq!(model.predict(&q).unwrap(), knn_oracle(&ds, k, &q), "k={k} q={q:?}");
        }
    }
}

#[test]
fn identity_forest_with_all_features_is_a_bag_of_one_tree() {
    let ds = blobs(240, 4, 3);
    let tree = TreeModel::train(&ds, &TreeParams::default()).unwrap();
    let params = ForestParams {
        n_trees: 7,
        feature_subsample: Some(ds.n_features()),
        bootstrap: Bootstrap::Identity,
        ..ForestParams::default()
    };
    let forest = ForestModel::train(&ds, &params).unwrap();
    for t in forest.trees() {
        assert_eq!(t.nodes(), tree.nodes());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let q: Vec<f64> = (0..ds.n_features()).map(|_| rng.random_range(-3.0..4.0)).collect();
        assert_eq!(forest.predict(&q).unwrap(), tree.predict(&q).unwrap());
        assert_eq!(forest.votes(&q).unwrap().iter().max(), Some(&7));
    }
    // with every row in every bag there is nothing out of bag
    let oob = oob_error(&forest, &ds).unwrap();
    assert!(!oob.is_defined());
    assert_eq!(oob.skipped, ds.n_rows());
}

#[test]
fn duplicating_a_feature_splits_its_importance() {
    let ds = blobs(600, 2, 5);
    let params = ForestParams { n_trees: 60, seed: 9, ..ForestParams::default() };
    let single = permutation_importance(&ForestModel::train(&ds, &params).unwrap(), &ds, 1).unwrap();
    let copy: Vec<f64> = (0..ds.n_rows()).map(|i| ds.value(i, 0)).collect();
    let dup = ds.with_column("f0_copy", &copy).unwrap();
    let both = permutation_importance(&ForestModel::train(&dup, &params).unwrap(), &dup, 1).unwrap();
    let last = dup.n_features() - 1;
    assert!(single.raw[0] > 0.05, "{:?}", single.raw);
    assert!(both.raw[0] < single.raw[0], "{} vs {}", both.raw[0], single.raw[0]);
    assert!(both.raw[last] < single.raw[0], "{} vs {}", both.raw[last], single.raw[0]);
    // the informative pair still outranks the noise columns
    let informative: Vec<usize> = [0, 1, last].into_iter().filter(|&f| both.ranking()[..3].contains(&f)).collect();
    assert_eq!(informative.len(), 3, "{:?}", both.scores);
}

#[test]
fn out_of_fold_predictions_never_see_their_own_row() {
    // 1-NN would echo a row's own label if the row were in its training set
    let mut ds = Dataset::new(["x"], ["a", "b"]);
    for i in 0..20 {
        ds.push(&[f64::from(i)], usize::from(i % 2 == 1), None).unwrap();
    }
    let folds = kfold_split(20, 20, 0).unwrap();
    let pred = out_of_fold_predictions(&ds, &ModelSpec::Knn(KnnParams { k: 1 }), &folds).unwrap();
    // every other nearest row has the opposite parity
    for (i, p) in pred.iter().enumerate() {
        assert_ne!(*p, ds.label(i), "row {i}");
    }
}

#[test]
fn cross_validation_is_deterministic_and_complete() {
    let ds = blobs(150, 2, 6);
    let spec = ModelSpec::Forest(ForestParams { n_trees: 10, ..ForestParams::default() });
    let a = cross_validate(&ds, &spec, 5, 42).unwrap();
    assert_eq!(a, cross_validate(&ds, &spec, 5, 42).unwrap());
    assert_eq!(a.confusion.total() as usize, ds.n_rows());
    assert_eq!(a.fold_sizes.iter().sum::<usize>(), ds.n_rows());
    let pooled = a.confusion.correct() as f64 / ds.n_rows() as f64;
    assert!((a.accuracy - pooled).abs() < 1e-12);
    assert!(a.accuracy > 0.7);
}

proptest! {
    #[test]
    fn kfold_is_a_balanced_partition(n in 2usize..500, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 2 + ((n - 2) as f64 * k_frac) as usize;
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0u8; n];
        for f in &folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(&folds, &kfold_split(n, k, seed).unwrap());
    }
}
