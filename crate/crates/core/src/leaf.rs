use serde::{Deserialize, Serialize};

use crate::data::{ClassTargets, OffsetTargets};
use crate::impurity::mean3;
use crate::scalar::{norm3, Scalar};

/// Per-joint payload of a regression leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLeaf<T> {
    /// Mean offset (mm) from the example to the joint.
    pub mean_offset: [T; 3],
    pub low_confidence: bool,
    /// Number of training offsets within the joint's radius.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafModel<T> {
    Class { histogram: Vec<T>, label: usize },
    Regression { joints: Vec<JointLeaf<T>> },
}

impl<T: Scalar> LeafModel<T> {
    pub fn label(&self) -> Option<usize> {
        match self {
            LeafModel::Class { label, .. } => Some(*label),
            LeafModel::Regression { .. } => None,
        }
    }

    pub fn histogram(&self) -> Option<&[T]> {
        match self {
            LeafModel::Class { histogram, .. } => Some(histogram),
            LeafModel::Regression { .. } => None,
        }
    }

    pub fn joints(&self) -> Option<&[JointLeaf<T>]> {
        match self {
            LeafModel::Regression { joints } => Some(joints),
            LeafModel::Class { .. } => None,
        }
    }
}

/// First index of the maximum; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn make_leaf_classification<T, D>(data: &D, indices: &[usize]) -> LeafModel<T>
where
    T: Scalar,
    D: ClassTargets + ?Sized,
{
    let k = data.num_classes();
    let mut counts = vec![0usize; k];
    for &i in indices {
        counts[data.label(i)] += 1;
    }
    let label = argmax(&counts);
    let n = indices.len();
    let histogram = if n == 0 {
        vec![T::one() / T::from_count(k); k]
    } else {
        let nt = T::from_count(n);
        counts.iter().map(|&c| T::from_count(c) / nt).collect()
    };
    LeafModel::Class { histogram, label }
}

/// Mean within-radius offset per joint. A joint is flagged low confidence
/// when the largest eigenvalue of its offset covariance reaches
/// `eigen_bound` (mm^2).
pub fn make_leaf_regression<T, D>(
    data: &D,
    indices: &[usize],
    radii: &[T],
    eigen_bound: T,
) -> LeafModel<T>
where
    T: Scalar,
    D: OffsetTargets<T> + ?Sized,
{
    let joints = (0..data.num_joints())
        .map(|j| {
            let members: Vec<[T; 3]> = indices
                .iter()
                .map(|&i| data.offset(i, j))
                .filter(|o| norm3(*o) < radii[j])
                .collect();
            if members.is_empty() {
                return JointLeaf {
                    mean_offset: [T::zero(); 3],
                    low_confidence: false,
                    support: 0,
                };
            }
            let mean = mean3(&members);
            let lambda = largest_eigenvalue(&covariance(&members, mean));
            JointLeaf {
                mean_offset: mean,
                low_confidence: lambda >= eigen_bound,
                support: members.len(),
            }
        })
        .collect();
    LeafModel::Regression { joints }
}

/// Population covariance (divides by n).
pub(crate) fn covariance<T: Scalar>(points: &[[T; 3]], mean: [T; 3]) -> [[T; 3]; 3] {
    let mut c = [[T::zero(); 3]; 3];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for r in 0..3 {
            for s in r..3 {
                c[r][s] = c[r][s] + d[r] * d[s];
            }
        }
    }
    let n = T::from_count(points.len());
    for r in 0..3 {
        for s in r..3 {
            c[r][s] = c[r][s] / n;
            c[s][r] = c[r][s];
        }
    }
    c
}

/// Largest eigenvalue of a symmetric 3x3 matrix, closed form.
pub fn largest_eigenvalue<T: Scalar>(a: &[[T; 3]; 3]) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let six = T::lit(6.0);
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == T::zero() {
        return a[0][0].max(a[1][1]).max(a[2][2]);
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / three;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + two * p1;
    let p = (p2 / six).sqrt();
    let b = |r: usize, s: usize| {
        let v = if r == s { a[r][s] - q } else { a[r][s] };
        v / p
    };
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det / two).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    q + two * p * phi.cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Labels(Vec<usize>, usize);
    impl ClassTargets for Labels {
        fn num_classes(&self) -> usize {
            self.1
        }
        fn label(&self, i: usize) -> usize {
            self.0[i]
        }
    }

    struct Offs(Vec<[f64; 3]>);
    impl OffsetTargets<f64> for Offs {
        fn num_joints(&self) -> usize {
            1
        }
        fn offset(&self, i: usize, _j: usize) -> [f64; 3] {
            self.0[i]
        }
    }

    #[test]
    fn class_leaf_counts_and_ties() {
        let d = Labels(vec![0, 0, 1], 2);
        let leaf = make_leaf_classification::<f64, _>(&d, &[0, 1, 2]);
        let h = leaf.histogram().unwrap();
        assert_relative_eq!(h[0], 2.0 / 3.0);
        assert_relative_eq!(h[1], 1.0 / 3.0);
        assert_eq!(leaf.label(), Some(0));

        let leaf = make_leaf_classification::<f64, _>(&d, &[0]);
        assert_eq!(leaf.histogram().unwrap(), &[1.0, 0.0]);

        let tie = Labels(vec![1, 0], 2);
        assert_eq!(make_leaf_classification::<f64, _>(&tie, &[0, 1]).label(), Some(0));
    }

    #[test]
    fn regression_leaf_equal_offsets_high_confidence() {
        let d = Offs(vec![[3.0, -1.0, 2.0]; 5]);
        let leaf = make_leaf_regression(&d, &[0, 1, 2, 3, 4], &[10.0], 100.0);
        let j = leaf.joints().unwrap()[0];
        assert_eq!(j.mean_offset, [3.0, -1.0, 2.0]);
        assert!(!j.low_confidence);
        assert_eq!(j.support, 5);
    }

    #[test]
    fn regression_leaf_wide_spread_is_low_confidence() {
        // -50, -25, 0, 25, 50 along x: population variance 1250 mm^2.
        let d = Offs((-2..=2).map(|k| [25.0 * f64::from(k), 0.0, 0.0]).collect());
        let leaf = make_leaf_regression(&d, &[0, 1, 2, 3, 4], &[100.0], 100.0);
        let j = leaf.joints().unwrap()[0];
        assert!(j.low_confidence);
        assert_relative_eq!(
            largest_eigenvalue(&covariance(&d.0, [0.0; 3])),
            1250.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn regression_leaf_without_support() {
        let d = Offs(vec![[30.0, 0.0, 0.0], [0.0, 0.0, -40.0]]);
        let leaf = make_leaf_regression(&d, &[0, 1], &[10.0], 100.0);
        assert_eq!(leaf.joints().unwrap()[0].support, 0);
    }

    #[test]
    fn eigenvalue_matches_symmetric_eigen_solver() {
        use nalgebra::Matrix3;
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 20.0 - 10.0
        };
        for _ in 0..500 {
            let pts: Vec<[f64; 3]> = (0..6).map(|_| [next(), next(), next()]).collect();
            let c = covariance(&pts, mean3(&pts));
            let m = Matrix3::from_fn(|r, s| c[r][s]);
            let reference = m.symmetric_eigen().eigenvalues.max();
            assert_relative_eq!(largest_eigenvalue(&c), reference, epsilon = 1e-8, max_relative = 1e-9);
        }
    }
}
