//! Baseline (greedy, gain-maximising) training.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassTargets, Dataset, OffsetTargets};
use crate::error::{Error, Result};
use crate::feature::{grid_threshold, range_threshold, Feature, FeatureFamily, Side, SplitTest};
use crate::forest::{Forest, Mode};
use crate::impurity::{entropy_from_counts, weighted_gain};
use crate::leaf::{make_leaf_classification, make_leaf_regression, LeafModel};
use crate::rng::{stream, Stream};
use crate::scalar::{norm3, sub3, Scalar};
use crate::tree::{Node, NodeId, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams<T> {
    pub num_trees: usize,
    /// Candidate tests per node (`m`). For depth features this is the number
    /// of sampled features, each tried at `thresholds_per_feature`
    /// thresholds.
    pub candidates: usize,
    /// `l_n`: nodes with fewer examples become leaves.
    pub leaf_capacity: usize,
    /// `L`: number of tree levels.
    pub max_levels: usize,
    pub thresholds_per_feature: usize,
    /// Per-joint proximity radii (mm). Empty for classification.
    pub radii: Vec<T>,
    /// Covariance eigenvalue (mm^2) at or above which a regression leaf
    /// estimate is flagged low confidence.
    pub eigen_bound: T,
    /// Leaf weight placeholder; nothing reads it.
    pub leaf_weight: T,
    pub family: FeatureFamily<T>,
    /// Draw a bootstrap sample of the training set per tree.
    pub bootstrap: bool,
    pub seed: u64,
}

impl<T: Scalar> TrainParams<T> {
    /// Axis-threshold classification defaults: 5 trees, m = 50, l_n = 60,
    /// L = 20.
    pub fn axis_classification(seed: u64) -> Self {
        TrainParams {
            num_trees: 5,
            candidates: 50,
            leaf_capacity: 60,
            max_levels: 20,
            thresholds_per_feature: 1,
            radii: Vec::new(),
            eigen_bound: T::lit(100.0),
            leaf_weight: T::lit(10.0),
            family: FeatureFamily::Axis2D,
            bootstrap: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(what.to_string()));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1");
        }
        if self.candidates == 0 {
            return bad("candidates (m) must be at least 1");
        }
        if self.leaf_capacity == 0 {
            return bad("leaf_capacity (l_n) must be at least 1");
        }
        if self.max_levels == 0 {
            return bad("max_levels (L) must be at least 1");
        }
        if self.thresholds_per_feature == 0 {
            return bad("thresholds_per_feature must be at least 1");
        }
        if self.radii.iter().any(|r| !(*r > T::zero())) {
            return bad("proximity radii must be positive");
        }
        if let FeatureFamily::DepthOffset { max_offset } = self.family {
            if !(max_offset > T::zero()) {
                return bad("max_offset must be positive");
            }
        }
        Ok(())
    }
}

/// What a tree is trained to do: how splits are scored, how leaves are
/// built, and how a leaf's answer for one example feeds the end-to-end
/// metric used by discriminative retraining.
pub trait Objective<T: Scalar, D: Dataset<T> + ?Sized>: Sync {
    fn mode(&self) -> Mode;

    /// Gain of splitting `indices` at each of `thresholds`. `values[k]` is
    /// the feature value of `indices[k]`.
    fn split_gains(&self, data: &D, indices: &[usize], values: &[T], thresholds: &[T]) -> Vec<T>;

    fn make_leaf(&self, data: &D, indices: &[usize]) -> LeafModel<T>;

    /// Contribution of one example, answered by `leaf`, to the metric total.
    fn example_term(&self, data: &D, index: usize, leaf: &LeafModel<T>) -> T;

    /// Turn a summed total into the higher-is-better metric.
    fn metric_from_total(&self, total: T) -> T;
}

/// Entropy-gain classification. The metric counts correct predictions.
#[derive(Debug, Clone, Copy)]
pub struct ClassObjective {
    pub num_classes: usize,
}

impl<T, D> Objective<T, D> for ClassObjective
where
    T: Scalar,
    D: Dataset<T> + ClassTargets + ?Sized,
{
    fn mode(&self) -> Mode {
        Mode::Classification
    }

    fn split_gains(&self, data: &D, indices: &[usize], values: &[T], thresholds: &[T]) -> Vec<T> {
        let k = self.num_classes;
        let n = indices.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite feature"));
        let mut thr_order: Vec<usize> = (0..thresholds.len()).collect();
        thr_order.sort_by(|&a, &b| thresholds[a].partial_cmp(&thresholds[b]).expect("finite threshold"));

        let mut total = vec![0usize; k];
        for &i in indices {
            total[data.label(i)] += 1;
        }
        let parent = entropy_from_counts::<T>(&total);
        let mut right = vec![0usize; k];
        let mut left = vec![0usize; k];
        let mut p = 0;
        let mut gains = vec![T::zero(); thresholds.len()];
        for &t in &thr_order {
            let gamma = thresholds[t];
            while p < n && values[order[p]] <= gamma {
                right[data.label(indices[order[p]])] += 1;
                p += 1;
            }
            for c in 0..k {
                left[c] = total[c] - right[c];
            }
            gains[t] = weighted_gain(
                parent,
                n - p,
                entropy_from_counts(&left),
                p,
                entropy_from_counts(&right),
            );
        }
        gains
    }

    fn make_leaf(&self, data: &D, indices: &[usize]) -> LeafModel<T> {
        make_leaf_classification(data, indices)
    }

    fn example_term(&self, data: &D, index: usize, leaf: &LeafModel<T>) -> T {
        if leaf.label() == Some(data.label(index)) {
            T::one()
        } else {
            T::zero()
        }
    }

    fn metric_from_total(&self, total: T) -> T {
        total
    }
}

/// Guard added to the summed joint error before taking its reciprocal.
pub const METRIC_EPSILON: f64 = 1e-9;

/// Offset-compactness regression over the joints in `radii`. The metric is
/// the reciprocal of the summed joint error.
#[derive(Debug, Clone)]
pub struct RegressionObjective<T> {
    pub radii: Vec<T>,
    pub eigen_bound: T,
}

impl<T: Scalar> RegressionObjective<T> {
    pub fn from_params(params: &TrainParams<T>) -> Self {
        RegressionObjective {
            radii: params.radii.clone(),
            eigen_bound: params.eigen_bound,
        }
    }

    /// Summed Euclidean error over joints of the leaf's offset estimates for
    /// one example. A joint without leaf support is estimated at the
    /// example itself.
    pub fn example_error<D: OffsetTargets<T> + ?Sized>(&self, data: &D, index: usize, leaf: &LeafModel<T>) -> T {
        let joints = leaf.joints().expect("regression leaf");
        let mut err = T::zero();
        for (j, jl) in joints.iter().enumerate() {
            let truth = data.offset(index, j);
            let est = if jl.support > 0 { jl.mean_offset } else { [T::zero(); 3] };
            err = err + norm3(sub3(est, truth));
        }
        err
    }
}

impl<T, D> Objective<T, D> for RegressionObjective<T>
where
    T: Scalar,
    D: Dataset<T> + OffsetTargets<T> + ?Sized,
{
    fn mode(&self) -> Mode {
        Mode::Regression
    }

    fn split_gains(&self, data: &D, indices: &[usize], values: &[T], thresholds: &[T]) -> Vec<T> {
        let n = indices.len();
        // Within-radius offsets per joint, tagged with their position in
        // `indices`.
        let members: Vec<Vec<(usize, [T; 3])>> = self
            .radii
            .iter()
            .enumerate()
            .map(|(j, &radius)| {
                indices
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| (k, data.offset(i, j)))
                    .filter(|(_, o)| norm3(*o) < radius)
                    .collect()
            })
            .collect();

        let parent: T = members.iter().map(|m| group_deviation(m.iter().map(|(_, o)| *o))).sum();

        thresholds
            .iter()
            .map(|&gamma| {
                let n_left = values.iter().filter(|&&v| v > gamma).count();
                let n_right = n - n_left;
                if n_left == 0 || n_right == 0 {
                    return T::zero();
                }
                let mut e_left = T::zero();
                let mut e_right = T::zero();
                for m in &members {
                    let l = m.iter().filter(|(k, _)| values[*k] > gamma).map(|(_, o)| *o);
                    let r = m.iter().filter(|(k, _)| values[*k] <= gamma).map(|(_, o)| *o);
                    e_left = e_left + group_deviation(l);
                    e_right = e_right + group_deviation(r);
                }
                weighted_gain(parent, n_left, e_left, n_right, e_right)
            })
            .collect()
    }

    fn make_leaf(&self, data: &D, indices: &[usize]) -> LeafModel<T> {
        make_leaf_regression(data, indices, &self.radii, self.eigen_bound)
    }

    fn example_term(&self, data: &D, index: usize, leaf: &LeafModel<T>) -> T {
        self.example_error(data, index, leaf)
    }

    fn metric_from_total(&self, total: T) -> T {
        T::one() / (total + T::lit(METRIC_EPSILON))
    }
}

/// Sum of distances from the group mean. Two passes over a cloneable
/// iterator.
fn group_deviation<T: Scalar, I: Iterator<Item = [T; 3]> + Clone>(group: I) -> T {
    let mut s = [T::zero(); 3];
    let mut count = 0usize;
    for o in group.clone() {
        for k in 0..3 {
            s[k] = s[k] + o[k];
        }
        count += 1;
    }
    if count == 0 {
        return T::zero();
    }
    let c = T::from_count(count);
    let mean = [s[0] / c, s[1] / c, s[2] / c];
    group.map(|o| norm3(sub3(o, mean))).sum()
}

/// Whether `candidate` beats `incumbent`; gains closer than a relative
/// 1e-12 count as tied.
#[inline]
pub(crate) fn strictly_better<T: Scalar>(candidate: T, incumbent: T) -> bool {
    let tol = T::lit(1e-12) * incumbent.abs().max(T::one());
    candidate > incumbent + tol
}

/// Index of the highest gain among the admissible entries of `gains`, ties
/// to the lowest index. `None` when nothing is admissible.
pub(crate) fn select_best<T: Scalar>(gains: &[T], admissible: impl Fn(usize) -> bool) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, &g) in gains.iter().enumerate() {
        if !admissible(i) {
            continue;
        }
        match best {
            Some((_, b)) if !strictly_better(g, b) => {}
            _ => best = Some((i, g)),
        }
    }
    best
}

/// Whether threshold `gamma` leaves both sides of `values` non-empty, given
/// their minimum and maximum.
#[inline]
pub(crate) fn splits_range<T: Scalar>((lo, hi): (T, T), gamma: T) -> bool {
    lo <= gamma && gamma < hi
}

/// Candidate test maximising gain on `indices`; ties go to the lowest
/// candidate index. Degenerate candidates (one side empty) are skipped, and
/// `None` means every candidate was degenerate, so the caller makes a leaf.
pub fn best_split<T, D, O>(
    objective: &O,
    data: &D,
    indices: &[usize],
    candidates: &[SplitTest<T>],
) -> Option<(usize, T)>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    if indices.is_empty() {
        return None;
    }
    let mut admissible = Vec::with_capacity(candidates.len());
    let gains: Vec<T> = candidates
        .iter()
        .map(|c| {
            let values = feature_values(data, indices, &c.feature);
            admissible.push(splits_range(min_max(&values), c.threshold));
            objective.split_gains(data, indices, &values, &[c.threshold])[0]
        })
        .collect();
    select_best(&gains, |i| admissible[i])
}

/// Candidate tests for one node, grouped by feature so each feature is
/// evaluated once.
pub(crate) struct CandidateGroup<T> {
    pub feature: Feature<T>,
    pub values: Vec<T>,
    pub thresholds: Vec<T>,
}

pub(crate) fn feature_values<T: Scalar, D: Dataset<T> + ?Sized>(
    data: &D,
    indices: &[usize],
    feature: &Feature<T>,
) -> Vec<T> {
    indices.iter().map(|&i| data.feature_value(i, feature)).collect()
}

fn min_max<T: Scalar>(values: &[T]) -> (T, T) {
    values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Sample `count` features with `per_feature` thresholds each. Axis
/// features take grid thresholds; depth features take thresholds uniform
/// over the empirical value range on `indices`.
pub(crate) fn sample_candidates<T, D>(
    family: &FeatureFamily<T>,
    level: usize,
    count: usize,
    per_feature: usize,
    data: &D,
    indices: &[usize],
    rng: &mut Stream,
) -> Vec<CandidateGroup<T>>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
{
    match family {
        FeatureFamily::Axis2D => {
            let feature = family.sample_feature(level, rng);
            let thresholds = (0..count).map(|_| grid_threshold(rng)).collect();
            vec![CandidateGroup {
                values: feature_values(data, indices, &feature),
                feature,
                thresholds,
            }]
        }
        FeatureFamily::DepthOffset { .. } => (0..count)
            .map(|_| {
                let feature = family.sample_feature(level, rng);
                let values = feature_values(data, indices, &feature);
                let (lo, hi) = min_max(&values);
                let thresholds = (0..per_feature).map(|_| range_threshold(lo, hi, rng)).collect();
                CandidateGroup {
                    feature,
                    values,
                    thresholds,
                }
            })
            .collect(),
    }
}

struct Grower<'a, T: Scalar, D: ?Sized, O: ?Sized> {
    objective: &'a O,
    data: &'a D,
    params: &'a TrainParams<T>,
    nodes: Vec<Node<T>>,
    rng: &'a mut Stream,
}

impl<'a, T, D, O> Grower<'a, T, D, O>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    fn grow(&mut self, indices: Vec<usize>, level: usize) -> NodeId {
        let id = self.nodes.len();
        let at_depth_limit = level + 1 >= self.params.max_levels;
        if at_depth_limit || indices.len() < self.params.leaf_capacity {
            self.nodes.push(Node::Leaf(self.objective.make_leaf(self.data, &indices)));
            return id;
        }
        let groups = sample_candidates(
            &self.params.family,
            level,
            self.params.candidates,
            self.params.thresholds_per_feature,
            self.data,
            &indices,
            self.rng,
        );
        let mut flat: Vec<(usize, usize)> = Vec::new();
        let mut gains: Vec<T> = Vec::new();
        let mut admissible: Vec<bool> = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            let range = min_max(&group.values);
            let gs = self
                .objective
                .split_gains(self.data, &indices, &group.values, &group.thresholds);
            for (t, gain) in gs.into_iter().enumerate() {
                flat.push((g, t));
                gains.push(gain);
                admissible.push(splits_range(range, group.thresholds[t]));
            }
        }
        let Some((best, _)) = select_best(&gains, |i| admissible[i]) else {
            self.nodes.push(Node::Leaf(self.objective.make_leaf(self.data, &indices)));
            return id;
        };
        let (g, t) = flat[best];
        let group = &groups[g];
        let test = SplitTest::new(group.feature, group.thresholds[t]);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (k, &i) in indices.iter().enumerate() {
            match test.side_of(group.values[k]) {
                Side::Left => left.push(i),
                Side::Right => right.push(i),
            }
        }
        drop(groups);
        drop(indices);
        self.nodes.push(Node::Split { test, left: 0, right: 0 });
        let l = self.grow(left, level + 1);
        let r = self.grow(right, level + 1);
        self.nodes[id] = Node::Split { test, left: l, right: r };
        id
    }
}

/// Grow one tree on `indices`, treating the root as sitting at
/// `start_level` (which fixes axis parity and the remaining depth budget).
pub fn grow_tree<T, D, O>(
    objective: &O,
    data: &D,
    indices: &[usize],
    params: &TrainParams<T>,
    start_level: usize,
    rng: &mut Stream,
) -> Tree<T>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    let mut grower = Grower {
        objective,
        data,
        params,
        nodes: Vec::new(),
        rng,
    };
    grower.grow(indices.to_vec(), start_level);
    Tree::from_nodes(grower.nodes, params.max_levels, params.leaf_capacity)
}

/// Train `params.num_trees` trees in parallel, tree `t` drawing from its own
/// stream derived from `(params.seed, t)`.
pub fn train_forest<T, D, O>(objective: &O, data: &D, params: &TrainParams<T>) -> Result<Forest<T>>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("training set is empty"));
    }
    let n = data.len();
    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(params.seed, "tree", &[t as u64]);
            let indices: Vec<usize> = if params.bootstrap {
                let mut b: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                b.sort_unstable();
                b
            } else {
                (0..n).collect()
            };
            grow_tree(objective, data, &indices, params, 0, &mut rng)
        })
        .collect();
    Ok(Forest::new(trees, objective.mode(), params.clone()))
}
