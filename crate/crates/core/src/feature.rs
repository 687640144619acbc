use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Number of distinct values on the threshold grid used by axis features:
/// every multiple of 0.001 strictly inside (0, 1).
pub const AXIS_GRID_SIZE: usize = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// Axis tested by nodes at `level`: even levels split on X, odd on Y.
    pub fn for_level(level: usize) -> Axis {
        if level % 2 == 0 {
            Axis::X
        } else {
            Axis::Y
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feature<T> {
    /// Raw coordinate of a 2D point.
    Axis2D(Axis),
    /// Depth difference probe with a planar offset `u`. The dataset decides
    /// the units; the mouse pixel sets read it as millimetres at the depth
    /// of the reference pixel.
    DepthOffset { u: [T; 2] },
}

impl<T> Feature<T> {
    pub fn family_name(&self) -> &'static str {
        match self {
            Feature::Axis2D(_) => "axis2d",
            Feature::DepthOffset { .. } => "depth-offset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A binary test `(feature, threshold)`. Examples whose feature value is
/// strictly greater than the threshold go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitTest<T> {
    pub feature: Feature<T>,
    pub threshold: T,
}

impl<T: Scalar> SplitTest<T> {
    pub fn new(feature: Feature<T>, threshold: T) -> Self {
        SplitTest { feature, threshold }
    }

    #[inline]
    pub fn side_of(&self, value: T) -> Side {
        if value > self.threshold {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// Which feature family a forest draws its candidate tests from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureFamily<T> {
    Axis2D,
    DepthOffset { max_offset: T },
}

impl<T: Scalar> FeatureFamily<T> {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureFamily::Axis2D => "axis2d",
            FeatureFamily::DepthOffset { .. } => "depth-offset",
        }
    }

    pub fn admits(&self, feature: &Feature<T>) -> bool {
        match (self, feature) {
            (FeatureFamily::Axis2D, Feature::Axis2D(_)) => true,
            (FeatureFamily::DepthOffset { max_offset }, Feature::DepthOffset { u }) => {
                u[0].abs() <= *max_offset && u[1].abs() <= *max_offset
            }
            _ => false,
        }
    }

    /// Draw a feature for a node at `level`.
    pub fn sample_feature<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> Feature<T> {
        match *self {
            FeatureFamily::Axis2D => Feature::Axis2D(Axis::for_level(level)),
            FeatureFamily::DepthOffset { max_offset } => {
                let r = max_offset.as_f64();
                let ux = rng.random_range(-r..=r);
                let uy = rng.random_range(-r..=r);
                Feature::DepthOffset {
                    u: [T::lit(ux), T::lit(uy)],
                }
            }
        }
    }
}

/// One threshold from the 3-decimal grid inside (0, 1), drawn uniformly
/// with replacement.
pub fn grid_threshold<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let k = rng.random_range(1..=AXIS_GRID_SIZE as u32);
    T::lit(f64::from(k) / 1000.0)
}

/// Uniform threshold over the closed range `[lo, hi]`.
pub fn range_threshold<T: Scalar, R: Rng + ?Sized>(lo: T, hi: T, rng: &mut R) -> T {
    if hi <= lo {
        return lo;
    }
    let t: f64 = rng.random();
    lo + (hi - lo) * T::lit(t)
}

/// Axis-aligned candidate tests for a node at `level`, thresholds drawn from
/// the 3-decimal grid with replacement.
pub fn axis_threshold_candidates<T: Scalar, R: Rng + ?Sized>(
    level: usize,
    count: usize,
    rng: &mut R,
) -> Vec<SplitTest<T>> {
    let feature = Feature::Axis2D(Axis::for_level(level));
    (0..count)
        .map(|_| SplitTest::new(feature, grid_threshold(rng)))
        .collect()
}

/// The whole grid for `level`, in ascending order: the exhaustive case of
/// sampling without replacement.
pub fn axis_threshold_grid<T: Scalar>(level: usize) -> Vec<SplitTest<T>> {
    let feature = Feature::Axis2D(Axis::for_level(level));
    (1..=AXIS_GRID_SIZE)
        .map(|k| SplitTest::new(feature, T::lit(k as f64 / 1000.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn axis_alternates_with_level() {
        let mut rng = stream(1, "t", &[]);
        for t in axis_threshold_candidates::<f64, _>(0, 50, &mut rng) {
            assert_eq!(t.feature, Feature::Axis2D(Axis::X));
        }
        for t in axis_threshold_candidates::<f64, _>(1, 50, &mut rng) {
            assert_eq!(t.feature, Feature::Axis2D(Axis::Y));
        }
        assert_eq!(Axis::for_level(6), Axis::X);
        assert_eq!(Axis::for_level(7), Axis::Y);
    }

    #[test]
    fn grid_thresholds_have_three_decimals() {
        let mut rng = stream(2, "t", &[]);
        for t in axis_threshold_candidates::<f64, _>(0, 5000, &mut rng) {
            let scaled = t.threshold * 1000.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
            assert!(t.threshold > 0.0 && t.threshold < 1.0);
        }
    }

    #[test]
    fn full_grid_is_every_value_once() {
        let grid = axis_threshold_grid::<f64>(3);
        assert_eq!(grid.len(), AXIS_GRID_SIZE);
        let ks: Vec<i64> = grid.iter().map(|t| (t.threshold * 1000.0).round() as i64).collect();
        assert_eq!(ks, (1..=999).collect::<Vec<_>>());
        assert!(grid.iter().all(|t| t.feature == Feature::Axis2D(Axis::Y)));
    }

    #[test]
    fn left_is_strictly_greater() {
        let t = SplitTest::new(Feature::<f64>::Axis2D(Axis::X), 0.5);
        assert_eq!(t.side_of(0.7), Side::Left);
        assert_eq!(t.side_of(0.5), Side::Right);
        assert_eq!(t.side_of(0.2), Side::Right);
    }

    #[test]
    fn depth_offsets_respect_radius() {
        let fam = FeatureFamily::DepthOffset { max_offset: 12.0f64 };
        let mut rng = stream(3, "t", &[]);
        for _ in 0..1000 {
            let f = fam.sample_feature(0, &mut rng);
            assert!(fam.admits(&f));
        }
    }
}
