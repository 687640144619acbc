mod common;

use common::{noisy_diagonal, OffsetPoints};
use discforest::error::Error;
use discforest::gauss::OBJECTIVE;
use discforest::persist::{from_document, load_forest, save_forest, to_document, FORMAT_VERSION};
use discforest::{train_forest, Forest, RegressionObjective, TrainParams};
use rand::Rng;

fn class_forest() -> (Forest<f64>, discforest::gauss::PointSet<f64>) {
    let data = noisy_diagonal(5000, 0.1, 1);
    let p = TrainParams {
        max_levels: 10,
        ..TrainParams::axis_classification(2)
    };
    (train_forest(&OBJECTIVE, &data, &p).unwrap(), data)
}

fn reg_forest() -> (Forest<f64>, RegressionObjective<f64>) {
    let data = OffsetPoints::random(3000, &[[0.3, 0.7, 0.1], [0.8, 0.2, -0.2]], 0.05, 3);
    let p = TrainParams {
        radii: vec![0.5; 2],
        max_levels: 8,
        leaf_capacity: 30,
        ..TrainParams::axis_classification(4)
    };
    let obj = RegressionObjective::from_params(&p);
    (train_forest(&obj, &data, &p).unwrap(), obj)
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, forest) in [("c", class_forest().0), ("r", reg_forest().0)] {
        let a = dir.path().join(format!("{name}1.json"));
        let b = dir.path().join(format!("{name}2.json"));
        save_forest(&forest, &a).unwrap();
        let loaded: Forest<f64> = load_forest(&a).unwrap();
        assert_eq!(loaded, forest);
        save_forest(&loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn reloaded_forest_gives_identical_outputs() {
    let (forest, _) = class_forest();
    let loaded: Forest<f64> = from_document(&to_document(&forest)).unwrap();
    let probe = noisy_diagonal(10_000, 0.0, 99);
    for i in 0..probe.points.len() {
        assert_eq!(forest.class_histogram(&probe, i, 2), loaded.class_histogram(&probe, i, 2));
    }

    let (forest, _) = reg_forest();
    let loaded: Forest<f64> = from_document(&to_document(&forest)).unwrap();
    let probe = OffsetPoints::random(10_000, &[[0.0; 3]], 0.0, 98);
    for i in 0..probe.xy.len() {
        let a: Vec<_> = forest.leaves(&probe, i).into_iter().cloned().collect();
        let b: Vec<_> = loaded.leaves(&probe, i).into_iter().cloned().collect();
        assert_eq!(a, b);
    }
}

#[test]
fn damaged_documents_are_rejected() {
    let text = to_document(&class_forest().0);
    for cut in [1, text.len() / 3, text.len() / 2, text.len() - 3] {
        assert!(matches!(from_document::<f64>(&text[..cut]), Err(Error::Corrupt(_))), "cut at {cut}");
    }
    let mut r = common::rng(5);
    for _ in 0..50 {
        let mut bytes = text.clone().into_bytes();
        let at = r.random_range(0..bytes.len());
        bytes[at] = b'#';
        let s = String::from_utf8(bytes).unwrap();
        assert!(from_document::<f64>(&s).is_err() || s == text);
    }
    let newer = text.replacen(
        &format!("\"formatVersion\":{FORMAT_VERSION}"),
        &format!("\"formatVersion\":{}", FORMAT_VERSION + 1),
        1,
    );
    assert!(matches!(from_document::<f64>(&newer), Err(Error::Version(v)) if v == FORMAT_VERSION + 1));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_forest::<f64>(&dir.path().join("missing.json")), Err(Error::Io(_))));
}
