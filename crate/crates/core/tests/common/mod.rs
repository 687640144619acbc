#![allow(dead_code)]

use discforest::gauss::{LabeledPoint2D, PointSet};
use discforest::{Dataset, Feature, OffsetTargets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn points(pts: &[(f64, f64, usize)]) -> PointSet<f64> {
    PointSet {
        points: pts.iter().map(|&(x, y, class)| LabeledPoint2D { x, y, class }).collect(),
    }
}

/// Points uniform in the unit square; class 1 above the diagonal, with
/// `flip` chance of a flipped label.
pub fn noisy_diagonal(n: usize, flip: f64, seed: u64) -> PointSet<f64> {
    let mut r = rng(seed);
    let points = (0..n)
        .map(|_| {
            let x: f64 = r.random();
            let y: f64 = r.random();
            let mut class = usize::from(y > x);
            if r.random::<f64>() < flip {
                class = 1 - class;
            }
            LabeledPoint2D { x, y, class }
        })
        .collect();
    PointSet { points }
}

/// 2D points carrying offsets to a few joints: the offsets to joint `j`
/// are `targets[j] - (x, y, 0)` plus uniform noise.
pub struct OffsetPoints {
    pub xy: Vec<(f64, f64)>,
    pub offsets: Vec<Vec<[f64; 3]>>,
}

impl OffsetPoints {
    pub fn random(n: usize, targets: &[[f64; 3]], noise: f64, seed: u64) -> Self {
        let mut r = rng(seed);
        let mut xy = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = r.random();
            let y: f64 = r.random();
            xy.push((x, y));
            offsets.push(
                targets
                    .iter()
                    .map(|t| {
                        [
                            t[0] - x + noise * r.random_range(-1.0..1.0),
                            t[1] - y + noise * r.random_range(-1.0..1.0),
                            t[2] + noise * r.random_range(-1.0..1.0),
                        ]
                    })
                    .collect(),
            );
        }
        OffsetPoints { xy, offsets }
    }
}

impl Dataset<f64> for OffsetPoints {
    fn len(&self) -> usize {
        self.xy.len()
    }

    fn feature_value(&self, index: usize, feature: &Feature<f64>) -> f64 {
        match feature {
            Feature::Axis2D(discforest::Axis::X) => self.xy[index].0,
            Feature::Axis2D(discforest::Axis::Y) => self.xy[index].1,
            Feature::DepthOffset { .. } => unreachable!(),
        }
    }
}

impl OffsetTargets<f64> for OffsetPoints {
    fn num_joints(&self) -> usize {
        self.offsets[0].len()
    }

    fn offset(&self, index: usize, joint: usize) -> [f64; 3] {
        self.offsets[index][joint]
    }
}

/// Shannon entropy (nats) of a label multiset, straight from the
/// definition.
pub fn oracle_entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let n = labels.len() as f64;
    let mut h = 0.0;
    for c in 0..=*labels.iter().max().unwrap() {
        let k = labels.iter().filter(|&&l| l == c).count();
        if k > 0 {
            let p = k as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Information gain of sending `left` and `right` apart.
pub fn oracle_gain(left: &[usize], right: &[usize]) -> f64 {
    let all: Vec<usize> = left.iter().chain(right).copied().collect();
    let n = all.len() as f64;
    oracle_entropy(&all) - left.len() as f64 / n * oracle_entropy(left) - right.len() as f64 / n * oracle_entropy(right)
}
