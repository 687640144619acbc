//! Node impurity measures: label entropy for classification and offset
//! compactness for joint regression, plus the size-weighted gain that both
//! share.

use crate::data::{ClassTargets, Dataset, OffsetTargets};
use crate::error::{Error, Result};
use crate::feature::{Side, SplitTest};
use crate::scalar::{norm3, sub3, Scalar};

/// Natural-log entropy of a class histogram given as raw counts.
pub fn entropy_from_counts<T: Scalar>(counts: &[usize]) -> T {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return T::zero();
    }
    let n = T::from_count(total);
    let mut e = T::zero();
    for &c in counts {
        if c > 0 && c < total {
            let p = T::from_count(c) / n;
            e = e - p * p.ln();
        }
    }
    e
}

/// Entropy of the labels of `indices`.
pub fn entropy<T: Scalar, D: ClassTargets + ?Sized>(data: &D, indices: &[usize]) -> Result<T> {
    if indices.is_empty() {
        return Err(Error::Domain("entropy of an empty set"));
    }
    let mut counts = vec![0usize; data.num_classes()];
    for &i in indices {
        counts[data.label(i)] += 1;
    }
    Ok(entropy_from_counts(&counts))
}

/// `E(S) - |S_l|/|S| E(S_l) - |S_r|/|S| E(S_r)`; zero when either side is
/// empty.
pub fn weighted_gain<T: Scalar>(parent: T, n_left: usize, e_left: T, n_right: usize, e_right: T) -> T {
    if n_left == 0 || n_right == 0 {
        return T::zero();
    }
    let n = T::from_count(n_left + n_right);
    parent - (T::from_count(n_left) / n) * e_left - (T::from_count(n_right) / n) * e_right
}

/// Entropy gain of splitting `indices` with `test`.
pub fn gain<T, D>(data: &D, indices: &[usize], test: &SplitTest<T>) -> Result<T>
where
    T: Scalar,
    D: Dataset<T> + ClassTargets + ?Sized,
{
    if indices.is_empty() {
        return Err(Error::Domain("gain of an empty set"));
    }
    let k = data.num_classes();
    let mut left = vec![0usize; k];
    let mut right = vec![0usize; k];
    for &i in indices {
        let side = test.side_of(data.feature_value(i, &test.feature));
        match side {
            Side::Left => left[data.label(i)] += 1,
            Side::Right => right[data.label(i)] += 1,
        }
    }
    let parent: Vec<usize> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    Ok(weighted_gain(
        entropy_from_counts(&parent),
        left.iter().sum(),
        entropy_from_counts(&left),
        right.iter().sum(),
        entropy_from_counts(&right),
    ))
}

/// Sum over joints of the distances of within-radius offsets from their
/// per-joint mean. Example `i` takes part for joint `j` only when
/// `|o_ij| < radii[j]`.
pub fn compactness<T, D>(data: &D, indices: &[usize], radii: &[T]) -> T
where
    T: Scalar,
    D: OffsetTargets<T> + ?Sized,
{
    let mut total = T::zero();
    for (j, &radius) in radii.iter().enumerate().take(data.num_joints()) {
        let members: Vec<[T; 3]> = indices
            .iter()
            .map(|&i| data.offset(i, j))
            .filter(|o| norm3(*o) < radius)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mean = mean3(&members);
        for o in &members {
            total = total + norm3(sub3(*o, mean));
        }
    }
    total
}

pub(crate) fn mean3<T: Scalar>(points: &[[T; 3]]) -> [T; 3] {
    let mut s = [T::zero(); 3];
    for p in points {
        for k in 0..3 {
            s[k] = s[k] + p[k];
        }
    }
    let n = T::from_count(points.len());
    [s[0] / n, s[1] / n, s[2] / n]
}
