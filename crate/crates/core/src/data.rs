use crate::feature::Feature;
use crate::scalar::Scalar;

/// Indexed collection of training or evaluation examples that can evaluate
/// split features.
pub trait Dataset<T: Scalar>: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn feature_value(&self, index: usize, feature: &Feature<T>) -> T;
}

/// Examples carrying a class label in `0..num_classes()`.
pub trait ClassTargets {
    fn num_classes(&self) -> usize;
    fn label(&self, index: usize) -> usize;
}

/// Examples carrying a 3D offset (mm) from the example to each of
/// `num_joints()` joints.
pub trait OffsetTargets<T: Scalar> {
    fn num_joints(&self) -> usize;
    fn offset(&self, index: usize, joint: usize) -> [T; 3];
}

impl<T: Scalar, D: Dataset<T> + ?Sized> Dataset<T> for &D {
    fn len(&self) -> usize {
        (**self).len()
    }
    fn feature_value(&self, index: usize, feature: &Feature<T>) -> T {
        (**self).feature_value(index, feature)
    }
}

impl<D: ClassTargets + ?Sized> ClassTargets for &D {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn label(&self, index: usize) -> usize {
        (**self).label(index)
    }
}

impl<T: Scalar, D: OffsetTargets<T> + ?Sized> OffsetTargets<T> for &D {
    fn num_joints(&self) -> usize {
        (**self).num_joints()
    }
    fn offset(&self, index: usize, joint: usize) -> [T; 3] {
        (**self).offset(index, joint)
    }
}
