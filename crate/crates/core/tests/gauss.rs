mod common;

use std::path::Path;

use discforest::feature::grid_threshold;
use discforest::gauss::{
    gen_mixture_spec, run_ablation, sample_dataset, AblationKind, GaussBench, GaussianMixtureSpec, PointSet,
    CANONICAL_SEED, MAX_SIGMA, NUM_PAIRS,
};
use discforest::{Axis, DiscParams, Feature, FeatureFamily, Forest, LeafModel, Mode, TrainParams, Tree};

const GOLDEN: &str = "tests/data/canonical-mixture.json";

#[test]
fn canonical_mixture_matches_golden_file() {
    let spec = gen_mixture_spec(CANONICAL_SEED);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    }
    let golden: GaussianMixtureSpec = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(spec, golden);
}

#[test]
fn mixture_shape() {
    for seed in 0..20 {
        let spec = gen_mixture_spec(seed);
        spec.validate().unwrap();
        assert_eq!(spec.components.len(), 18);
        for class in 0..2 {
            assert_eq!(spec.components.iter().filter(|c| c.class == class).count(), NUM_PAIRS);
        }
        for c in &spec.components {
            assert!(c.mean.iter().all(|&m| m > 0.0 && m < 1.0));
            assert!(c.sigma > 0.0 && c.sigma < MAX_SIGMA);
        }
    }
    let mut bad = gen_mixture_spec(1);
    bad.components.pop();
    assert!(bad.validate().is_err());
}

/// Mixture moments computed straight from the component list.
fn mixture_moments(spec: &GaussianMixtureSpec) -> ([f64; 2], [f64; 2]) {
    let k = spec.components.len() as f64;
    let mut mean = [0.0; 2];
    let mut second = [0.0; 2];
    for c in &spec.components {
        for a in 0..2 {
            mean[a] += c.mean[a] / k;
            second[a] += (c.mean[a] * c.mean[a] + c.sigma * c.sigma) / k;
        }
    }
    (mean, [second[0] - mean[0] * mean[0], second[1] - mean[1] * mean[1]])
}

#[test]
fn samples_follow_the_mixture() {
    let spec = gen_mixture_spec(CANONICAL_SEED);
    let n = 1_000_000;
    let d: PointSet<f64> = sample_dataset(&spec, n, 5);
    assert_eq!(d.points.len(), n);
    assert!((d.class_ratio() - 0.5).abs() <= 0.01);

    let (mean, var) = mixture_moments(&spec);
    let coords = |a: usize| d.points.iter().map(move |p| if a == 0 { p.x } else { p.y });
    for a in 0..2 {
        let m = coords(a).sum::<f64>() / n as f64;
        let v = coords(a).map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let se = (var[a] / n as f64).sqrt();
        assert!((m - mean[a]).abs() < 5.0 * se, "axis {a}: mean {m} vs {}", mean[a]);
        assert!((v / var[a] - 1.0).abs() < 0.01, "axis {a}: var {v} vs {}", var[a]);
    }

    let one: PointSet<f64> = sample_dataset(&spec, 1, 9);
    assert_eq!(one.points.len(), 1);
    assert!(one.points[0].class < 2);
}

#[test]
fn sampling_is_reproducible_and_thread_invariant() {
    let spec = gen_mixture_spec(3);
    let a: PointSet<f64> = sample_dataset(&spec, 40_000, 7);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b: PointSet<f64> = pool.install(|| sample_dataset(&spec, 40_000, 7));
    assert_eq!(a, b);
    let c: PointSet<f64> = sample_dataset(&spec, 40_000, 8);
    assert_ne!(a, c);
}

#[test]
fn axis_candidates_alternate_and_sit_on_the_grid() {
    let mut r = common::rng(4);
    for level in 0..6 {
        let f: Feature<f64> = FeatureFamily::Axis2D.sample_feature(level, &mut r);
        let want = if level % 2 == 0 { Axis::X } else { Axis::Y };
        assert_eq!(f, Feature::Axis2D(want));
    }
    for _ in 0..10_000 {
        let t: f64 = grid_threshold(&mut r);
        let k = (t * 1000.0).round();
        assert!((1.0..=999.0).contains(&k));
        assert!((t - k / 1000.0).abs() < 1e-15);
    }
}

#[test]
fn constant_predictor_scores_about_half() {
    let bench: GaussBench<f64> = GaussBench::new(CANONICAL_SEED, 200_000);
    let leaf = LeafModel::Class {
        histogram: vec![1.0, 0.0],
        label: 0,
    };
    let f = Forest::new(
        vec![Tree::single_leaf(leaf, 1, 1)],
        Mode::Classification,
        TrainParams::axis_classification(0),
    );
    let acc = f.accuracy(&bench.eval).unwrap();
    assert!((acc - 0.5).abs() < 0.01, "{acc}");
}

#[test]
fn ablation_rows_follow_the_grid() {
    let bench: GaussBench<f64> = GaussBench::new(1, 3000);
    let base = TrainParams {
        max_levels: 8,
        num_trees: 3,
        ..TrainParams::axis_classification(1)
    };
    let disc = DiscParams::new(20, 60, 2);
    let rows = run_ablation(&bench, AblationKind::ForestSize, &[1, 3], &base, &disc).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), [1, 3]);
    let rows = run_ablation(&bench, AblationKind::Candidates, &[5, 10, 20], &base, &disc).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.baseline_acc) && (0.0..=1.0).contains(&r.disc_acc));
        // One baseline serves the whole sweep.
        assert_eq!(r.baseline_acc, rows[0].baseline_acc);
    }
    assert!(run_ablation(&bench, AblationKind::LeafSize, &[], &base, &disc).is_err());
    assert!(run_ablation(&bench, AblationKind::ForestSize, &[0], &base, &disc).is_err());
    for kind in ["forest-size", "m", "leaf-size", "start-level", "iterations"] {
        assert_eq!(AblationKind::parse(kind).unwrap().name(), kind);
    }
}
