mod common;

use approx::assert_abs_diff_eq;
use common::{oracle_entropy, oracle_gain, points, OffsetPoints};
use discforest::{compactness, entropy, entropy_from_counts, gain, Axis, Feature, SplitTest};
use proptest::prelude::*;

#[test]
fn entropy_of_small_sets() {
    let pure = points(&[(0.1, 0.1, 0), (0.2, 0.2, 0), (0.3, 0.3, 0)]);
    assert_eq!(entropy::<f64, _>(&pure, &[0, 1, 2]).unwrap(), 0.0);
    let two = points(&[(0.1, 0.1, 0), (0.2, 0.2, 1)]);
    assert_abs_diff_eq!(entropy::<f64, _>(&two, &[0, 1]).unwrap(), 2f64.ln(), epsilon = 1e-15);
    // p = (0.25, 0.75): -0.25 ln 0.25 - 0.75 ln 0.75
    let skew = points(&[(0.1, 0.1, 0), (0.2, 0.2, 1), (0.3, 0.3, 1), (0.4, 0.4, 1)]);
    let h: f64 = entropy(&skew, &[0, 1, 2, 3]).unwrap();
    assert_abs_diff_eq!(h, -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln()), epsilon = 1e-15);
    assert_abs_diff_eq!(h, 0.5623, epsilon = 5e-5);
    assert!(entropy::<f64, _>(&skew, &[]).is_err());
}

#[test]
fn gain_examples() {
    let x = |g: f64| SplitTest::new(Feature::Axis2D(Axis::X), g);
    let pure = points(&[(0.2, 0.5, 1), (0.8, 0.5, 1), (0.6, 0.1, 1)]);
    assert_eq!(gain(&pure, &[0, 1, 2], &x(0.5)).unwrap(), 0.0);

    let perfect = points(&[(0.2, 0.5, 0), (0.8, 0.5, 1)]);
    assert_abs_diff_eq!(gain(&perfect, &[0, 1], &x(0.5)).unwrap(), 2f64.ln(), epsilon = 1e-15);

    // Four points, split 2/2 with one of each class on the left.
    let four = points(&[(0.9, 0.0, 0), (0.8, 0.0, 1), (0.1, 0.0, 1), (0.2, 0.0, 1)]);
    let expect = oracle_gain(&[0, 1], &[1, 1]);
    assert_abs_diff_eq!(gain(&four, &[0, 1, 2, 3], &x(0.5)).unwrap(), expect, epsilon = 1e-15);
    // Hand value: H(1/4, 3/4) - 0.5 ln 2.
    assert_abs_diff_eq!(expect, 0.5623351446188083 - 0.5 * 2f64.ln(), epsilon = 1e-15);
}

#[test]
fn compactness_examples() {
    // Joint 0: two offsets 2 mm apart, each 1 mm from the mean.
    let data = OffsetPoints {
        xy: vec![(0.0, 0.0), (0.0, 0.0)],
        offsets: vec![vec![[0.0, 0.0, 0.0]], vec![[2.0, 0.0, 0.0]]],
    };
    assert_abs_diff_eq!(compactness(&data, &[0, 1], &[1e6]), 2.0, epsilon = 1e-12);
    // Out of radius: nothing counts.
    assert_eq!(compactness(&data, &[0, 1], &[0.5]), 0.0);
    // Equal offsets for joint 0; joint 1 entirely out of radius.
    let same = OffsetPoints {
        xy: vec![(0.0, 0.0); 3],
        offsets: vec![vec![[3.0, 1.0, 0.0], [90.0, 0.0, 0.0]]; 3],
    };
    assert_eq!(compactness(&same, &[0, 1, 2], &[10.0, 10.0]), 0.0);
}

proptest! {
    #[test]
    fn entropy_is_bounded(counts in prop::collection::vec(0usize..50, 2..7)) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let h: f64 = entropy_from_counts(&counts);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (counts.len() as f64).ln() + 1e-12);
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(c, k)).collect();
        prop_assert!((h - oracle_entropy(&labels)).abs() < 1e-12);
    }

    #[test]
    fn gain_is_never_negative(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0usize..2), 1..40),
        gamma in 0.001f64..0.999,
        vertical in any::<bool>(),
    ) {
        let data = points(&pts);
        let idx: Vec<usize> = (0..pts.len()).collect();
        let axis = if vertical { Axis::Y } else { Axis::X };
        let g = gain(&data, &idx, &SplitTest::new(Feature::Axis2D(axis), gamma)).unwrap();
        prop_assert!(g >= -1e-12);
    }

    #[test]
    fn compactness_is_non_negative(
        offs in prop::collection::vec(prop::array::uniform3(-30.0f64..30.0), 1..20),
        radius in 1.0f64..60.0,
    ) {
        let data = OffsetPoints {
            xy: vec![(0.0, 0.0); offs.len()],
            offsets: offs.iter().map(|o| vec![*o]).collect(),
        };
        let idx: Vec<usize> = (0..offs.len()).collect();
        prop_assert!(compactness(&data, &idx, &[radius]) >= 0.0);
    }
}
