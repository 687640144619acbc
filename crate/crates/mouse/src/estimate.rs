//! Test-time joint estimation, joint error, per-pixel part labeling and
//! confusion matrices.

use discforest::{Forest, LeafModel, Mode};
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::pixels::{sample_pixel_locations, PixelSet};
use crate::render::{DepthImage, LabelImage, PartLabel, NUM_PARTS};
use crate::skeleton::NUM_MAIN_JOINTS;

/// Query pixels per image when none is configured.
pub const DEFAULT_QUERY_PIXELS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointGuess {
    pub position: [f64; 3],
    pub confidence: Confidence,
}

/// One entry per main joint; `None` when no leaf had support for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub joints: Vec<Option<JointGuess>>,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    sum: Vector3<f64>,
    count: usize,
}

impl Acc {
    fn add(&mut self, p: Vector3<f64>) {
        self.sum += p;
        self.count += 1;
    }
}

/// Candidate sums contributed by one pixel: per joint, (high, low).
fn pixel_candidates(forest: &Forest<f64>, set: &PixelSet<'_>, index: usize) -> Vec<(Acc, Acc)> {
    let origin = set.point(index).coords;
    let mut acc = vec![(Acc::default(), Acc::default()); NUM_MAIN_JOINTS];
    for leaf in forest.leaves(set, index) {
        let LeafModel::Regression { joints } = leaf else {
            continue;
        };
        for (j, jl) in joints.iter().enumerate().take(NUM_MAIN_JOINTS) {
            if jl.support == 0 {
                continue;
            }
            let p = origin + Vector3::from(jl.mean_offset);
            if jl.low_confidence {
                acc[j].1.add(p);
            } else {
                acc[j].0.add(p);
            }
        }
    }
    acc
}

/// Estimate the main joints from `n_query` foreground pixels drawn from
/// `(seed, "pixels", [0])`. Each pixel's 3D point plus every supported
/// leaf offset is a candidate; a joint takes the mean of its high-confidence
/// candidates, falling back to the low-confidence ones (flagged low), and is
/// missing when it has neither. Per-pixel work runs in parallel and is
/// reduced in pixel order.
pub fn estimate_joints(
    forest: &Forest<f64>,
    image: &DepthImage,
    camera: &Camera,
    n_query: usize,
    seed: u64,
) -> Result<JointEstimate> {
    forest.expect_mode(Mode::Regression)?;
    let examples = sample_pixel_locations(&[image], n_query, seed);
    if examples.is_empty() {
        return Err(Error::Data("image has no foreground pixels".into()));
    }
    let set = PixelSet::unlabeled(vec![image], *camera, examples);
    let per_pixel: Vec<Vec<(Acc, Acc)>> = (0..set.examples.len())
        .into_par_iter()
        .map(|i| pixel_candidates(forest, &set, i))
        .collect();
    let mut total = vec![(Acc::default(), Acc::default()); NUM_MAIN_JOINTS];
    for px in &per_pixel {
        for (t, p) in total.iter_mut().zip(px) {
            t.0.sum += p.0.sum;
            t.0.count += p.0.count;
            t.1.sum += p.1.sum;
            t.1.count += p.1.count;
        }
    }
    let joints = total
        .into_iter()
        .map(|(high, low)| {
            let (acc, confidence) = if high.count > 0 {
                (high, Confidence::High)
            } else if low.count > 0 {
                (low, Confidence::Low)
            } else {
                return None;
            };
            let m = acc.sum / acc.count as f64;
            Some(JointGuess {
                position: [m.x, m.y, m.z],
                confidence,
            })
        })
        .collect();
    Ok(JointEstimate { joints })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointErrorReport {
    /// Euclidean error (mm) per joint; `None` for missing joints.
    pub per_joint: Vec<Option<f64>>,
    /// Mean over the joints that were estimated.
    pub mean: f64,
    pub missing: Vec<usize>,
}

pub fn joint_error(estimate: &JointEstimate, truth: &[Point3<f64>]) -> Result<JointErrorReport> {
    if truth.len() < estimate.joints.len() {
        return Err(Error::Data(format!(
            "estimate has {} joints but truth has {}",
            estimate.joints.len(),
            truth.len()
        )));
    }
    let per_joint: Vec<Option<f64>> = estimate
        .joints
        .iter()
        .zip(truth)
        .map(|(g, t)| g.map(|g| (Point3::from(g.position) - t).norm()))
        .collect();
    let missing = per_joint
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_none())
        .map(|(j, _)| j)
        .collect();
    let present: Vec<f64> = per_joint.iter().flatten().copied().collect();
    let mean = if present.is_empty() {
        f64::NAN
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(JointErrorReport {
        per_joint,
        mean,
        missing,
    })
}

/// Label every foreground pixel with the argmax of the tree-averaged class
/// histogram (ties to the lower class id). Background stays background.
pub fn part_label_image(forest: &Forest<f64>, image: &DepthImage, camera: &Camera) -> Result<LabelImage> {
    forest.expect_mode(Mode::Classification)?;
    let set = PixelSet::whole_image(image, *camera);
    let labels: Vec<usize> = (0..set.examples.len())
        .into_par_iter()
        .map(|i| {
            let h = forest.class_histogram(&set, i, NUM_PARTS);
            let mut best = 0;
            for c in 1..h.len() {
                if h[c] > h[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let mut out = LabelImage::blank(image.width, image.height);
    for (e, &l) in set.examples.iter().zip(&labels) {
        out.values[e.v as usize * image.width + e.u as usize] =
            PartLabel::from_id(l as u8).expect("class id in range");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Pixel counts: rows are true classes, columns predicted.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; NUM_PARTS]; NUM_PARTS],
        }
    }

    /// Accumulate one image pair. Foreground masks must agree.
    pub fn add(&mut self, pred: &LabelImage, truth: &LabelImage) -> Result<()> {
        if pred.width != truth.width || pred.height != truth.height {
            return Err(Error::Data("label images differ in size".into()));
        }
        for (&p, &t) in pred.values.iter().zip(&truth.values) {
            match (p == PartLabel::Background, t == PartLabel::Background) {
                (true, true) => {}
                (false, false) => self.counts[t.id() as usize][p.id() as usize] += 1,
                _ => return Err(Error::Data("foreground masks of prediction and truth differ".into())),
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Row-normalised matrix; rows without support are all zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    /// Classes with no true pixels.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..NUM_PARTS).filter(|&c| self.support(c) == 0).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.normalized();
        (0..NUM_PARTS).map(|c| n[c][c]).collect()
    }

    /// Fraction of foreground pixels labelled correctly.
    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum();
        let right: u64 = (0..NUM_PARTS).map(|c| self.counts[c][c]).sum();
        if total == 0 {
            f64::NAN
        } else {
            right as f64 / total as f64
        }
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Row-normalised confusion of one prediction against its truth.
pub fn confusion_matrix(pred: &LabelImage, truth: &LabelImage) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new();
    m.add(pred, truth)?;
    Ok(m)
}
