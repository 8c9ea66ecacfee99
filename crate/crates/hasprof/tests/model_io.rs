use std::path::Path;

use hasprof::model_io::{decode, encode, load_model, save_model, SavedModel, VERSION};
use hasprof::Error;
use hasprof_core::learn::{oob_error, ForestParams, KnnParams, Learner, TreeParams};
use hasprof_core::{Classifier, Dataset, Model, ModelSpec, WindowConfig};

/// Deterministic 20-feature, 4-class dataset with some structure.
fn dataset(n: usize) -> Dataset {
    let cfg = WindowConfig::default();
    let mut ds = Dataset::new(cfg.feature_names(), ["Filling", "Steady", "Depleting", "Unclear"]);
    let mut s = 12345u64;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..n {
        let class = i % 4;
        let x: Vec<f64> = (0..20).map(|j| next() + if j % 5 == class { 0.8 } else { 0.0 }).collect();
        ds.push(&x, class, None).unwrap();
    }
    ds
}

fn saved(spec: ModelSpec, ds: &Dataset) -> SavedModel {
    let model = spec.fit(ds).unwrap();
    SavedModel::new(model, WindowConfig::default(), ds.feature_names().to_vec(), ds.class_names().to_vec()).unwrap()
}

fn probes() -> Vec<Vec<f64>> {
    let mut s = 99u64;
    (0..100)
        .map(|_| {
            (0..20)
                .map(|_| {
                    s ^= s << 13;
                    s ^= s >> 7;
                    s ^= s << 17;
                    (s % 2000) as f64 / 1000.0 - 0.2
                })
                .collect()
        })
        .collect()
}

fn specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Forest(ForestParams { n_trees: 12, ..ForestParams::default() }),
        ModelSpec::Tree(TreeParams::default()),
        ModelSpec::Knn(KnnParams { k: 3 }),
    ]
}

#[test]
fn round_trip_predicts_identically() {
    let ds = dataset(400);
    let dir = tempfile::tempdir().unwrap();
    for spec in specs() {
        let m = saved(spec, &ds);
        let path = dir.path().join(format!("{}.bin", m.model.kind().name()));
        save_model(&path, &m).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        for x in probes() {
            assert_eq!(back.model.predict(&x).unwrap(), m.model.predict(&x).unwrap());
            assert_eq!(back.model.predict_scores(&x).unwrap(), m.model.predict_scores(&x).unwrap());
        }
    }
}

#[test]
fn loaded_forest_keeps_out_of_bag_state() {
    let ds = dataset(200);
    let m = saved(ModelSpec::Forest(ForestParams { n_trees: 8, ..ForestParams::default() }), &ds);
    let back = decode(&encode(&m), Path::new("m")).unwrap();
    let (Model::Forest(a), Model::Forest(b)) = (&m.model, &back.model) else { panic!("not a forest") };
    assert_eq!(oob_error(a, &ds).unwrap(), oob_error(b, &ds).unwrap());
}

#[test]
fn encoding_is_deterministic() {
    let ds = dataset(300);
    for spec in specs() {
        assert_eq!(encode(&saved(spec.clone(), &ds)), encode(&saved(spec, &ds)));
    }
}

#[test]
fn corrupt_magic_is_a_format_error() {
    let mut bytes = encode(&saved(ModelSpec::Tree(TreeParams::default()), &dataset(40)));
    bytes[0] ^= 0xff;
    assert!(matches!(decode(&bytes, Path::new("m")), Err(Error::Format { .. })));
    assert!(matches!(decode(b"HASP", Path::new("m")), Err(Error::Format { .. })));
}

#[test]
fn version_mismatch_is_a_version_error() {
    let mut bytes = encode(&saved(ModelSpec::Tree(TreeParams::default()), &dataset(40)));
    bytes[8..10].copy_from_slice(&(VERSION + 1).to_le_bytes());
    match decode(&bytes, Path::new("m")) {
        Err(Error::Version { found, supported, .. }) => assert_eq!((found, supported), (VERSION + 1, VERSION)),
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn truncation_and_trailing_bytes_are_rejected() {
    let ds = dataset(60);
    for spec in specs() {
        let bytes = encode(&saved(spec, &ds));
        for cut in [11, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut], Path::new("m")), Err(Error::Format { .. })), "cut at {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long, Path::new("m")), Err(Error::Format { .. })));
    }
}

#[test]
fn header_layout_matches_the_document() {
    let bytes = encode(&saved(ModelSpec::Knn(KnnParams { k: 1 }), &dataset(8)));
    assert_eq!(&bytes[..8], b"HASPMODL");
    assert_eq!(u16::from_le_bytes([bytes[8], bytes[9]]), 1);
    assert_eq!(bytes[10], 2);
    assert_eq!(u32::from_le_bytes(bytes[11..15].try_into().unwrap()), 20);
    assert_eq!(u32::from_le_bytes(bytes[15..19].try_into().unwrap()), 4);
    assert_eq!(u32::from_le_bytes(bytes[19..23].try_into().unwrap()), 7);
    assert_eq!(&bytes[23..30], b"Filling");
}

#[test]
fn names_must_match_the_model() {
    let ds = dataset(40);
    let model = ModelSpec::Tree(TreeParams::default()).fit(&ds).unwrap();
    let short = ds.feature_names()[..19].to_vec();
    assert!(SavedModel::new(model, WindowConfig::default(), short, ds.class_names().to_vec()).is_err());
}
