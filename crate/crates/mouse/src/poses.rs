//! Procedural pose library and randomised pose perturbation.

use std::f64::consts::PI;

use discforest::rng::stream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{fk_unchecked, SkeletonModel, SkeletonPose};

/// Generator family of a library pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoseFamily {
    Gait,
    Stand,
    Rear,
    Bend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryPose {
    pub family: PoseFamily,
    pub pose: SkeletonPose,
}

const SPINE_BONES: [usize; 4] = [1, 2, 3, 5];
const FORE_LIMBS: [[usize; 2]; 2] = [[12, 13], [14, 15]];
const HIND_LIMBS: [[usize; 2]; 2] = [[16, 17], [18, 19]];

fn set(pose: &mut SkeletonPose, joint: usize, dof: usize, value: f64) {
    pose.angles[joint][dof] = value;
}

fn gait(phase: f64, stride: f64) -> SkeletonPose {
    let mut p = SkeletonPose::default();
    let s = (2.0 * PI * phase).sin();
    let c = (2.0 * PI * phase).cos();
    for (k, &b) in SPINE_BONES.iter().enumerate() {
        set(&mut p, b, 0, 0.08 * s * if k % 2 == 0 { 1.0 } else { -1.0 });
    }
    set(&mut p, 6, 0, 0.3 * c);
    set(&mut p, 7, 0, 0.4 * s);
    // Diagonal pairs swing together.
    for (side, sign) in [(0, 1.0), (1, -1.0)] {
        let [upper, lower] = FORE_LIMBS[side];
        set(&mut p, upper, 1, stride * s * sign);
        set(&mut p, lower, 1, -0.5 * stride * s * sign);
        let [upper, lower] = HIND_LIMBS[side];
        set(&mut p, upper, 1, -stride * s * sign);
        set(&mut p, lower, 1, 0.5 * stride * c * sign);
    }
    p
}

fn stand(head_yaw: f64, head_pitch: f64) -> SkeletonPose {
    let mut p = SkeletonPose::default();
    set(&mut p, 1, 0, head_yaw);
    set(&mut p, 2, 0, 0.5 * head_yaw);
    set(&mut p, 0, 1, head_pitch);
    set(&mut p, 1, 1, 0.5 * head_pitch);
    set(&mut p, 6, 0, -0.5 * head_yaw);
    p
}

fn rear(lift: f64, tail_curl: f64) -> SkeletonPose {
    let mut p = SkeletonPose::default();
    // Negative pitch raises the front of the body.
    set(&mut p, 3, 1, -lift);
    set(&mut p, 2, 1, -0.6 * lift);
    set(&mut p, 1, 1, 0.4 * lift);
    for [upper, lower] in FORE_LIMBS {
        set(&mut p, upper, 1, -0.8 * lift);
        set(&mut p, lower, 1, 0.6 * lift);
    }
    set(&mut p, 6, 0, tail_curl);
    set(&mut p, 7, 0, tail_curl);
    p
}

fn bend(curvature: f64, tail: f64) -> SkeletonPose {
    let mut p = SkeletonPose::default();
    for &b in &SPINE_BONES[..3] {
        set(&mut p, b, 0, curvature);
    }
    set(&mut p, 5, 0, -curvature);
    set(&mut p, 0, 0, 0.5 * curvature);
    set(&mut p, 6, 0, tail);
    set(&mut p, 7, 0, 0.5 * tail);
    p
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Four generator families over fixed parameter grids, each pose grounded
/// so its lowest capsule touches the floor.
pub fn default_library(model: &SkeletonModel) -> Vec<LibraryPose> {
    let mut out = Vec::new();
    let mut push = |family, mut pose: SkeletonPose| {
        pose.clamp_to(model);
        ground(model, &mut pose);
        out.push(LibraryPose { family, pose });
    };
    for stride in [0.3, 0.6] {
        for i in 0..16 {
            push(PoseFamily::Gait, gait(i as f64 / 16.0, stride));
        }
    }
    for yaw in grid(-0.5, 0.5, 5) {
        for pitch in grid(-0.3, 0.3, 4) {
            push(PoseFamily::Stand, stand(yaw, pitch));
        }
    }
    for lift in grid(0.1, 0.5, 5) {
        for curl in grid(-0.6, 0.6, 3) {
            push(PoseFamily::Rear, rear(lift, curl));
        }
    }
    for curvature in grid(-0.5, 0.5, 9) {
        for tail in grid(-0.8, 0.8, 3) {
            push(PoseFamily::Bend, bend(curvature, tail));
        }
    }
    out
}

/// Lowest point of any bone capsule (mm).
pub fn lowest_point(model: &SkeletonModel, pose: &SkeletonPose) -> f64 {
    let posed = fk_unchecked(model, pose);
    model
        .joints
        .iter()
        .enumerate()
        .filter(|(_, d)| d.parent.is_some())
        .map(|(j, d)| posed.positions[j].z - d.radius * pose.scale)
        .fold(f64::INFINITY, f64::min)
}

/// Shift the pose vertically so its lowest capsule touches z = 0.
pub fn ground(model: &SkeletonModel, pose: &mut SkeletonPose) {
    let low = lowest_point(model, pose);
    if low.abs() > 1e-9 {
        pose.global.translation[2] -= low;
    }
}

/// Half-widths of the uniform perturbations applied to a library pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRanges {
    /// In-plane rotation (rad).
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Relative overall scale.
    pub scale: f64,
    /// Relative per-bone length.
    pub bone_length: f64,
    /// Floor-plane translation (mm).
    pub translation: f64,
    /// Per-joint angle jitter (rad).
    pub joint_angle: f64,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        PerturbationRanges {
            yaw: PI,
            pitch: 0.2,
            roll: 0.2,
            scale: 0.1,
            bone_length: 0.05,
            translation: 5.0,
            joint_angle: 0.1,
        }
    }
}

impl PerturbationRanges {
    pub fn zero() -> Self {
        PerturbationRanges {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            scale: 0.0,
            bone_length: 0.0,
            translation: 0.0,
            joint_angle: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.yaw,
            self.pitch,
            self.roll,
            self.scale,
            self.bone_length,
            self.translation,
            self.joint_angle,
        ];
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Pose("perturbation ranges must be finite and non-negative".into()));
        }
        if self.scale >= 1.0 || self.bone_length >= 1.0 {
            return Err(Error::Pose("relative scale ranges must be below 1".into()));
        }
        Ok(())
    }
}

/// Retries before an out-of-limit perturbation is clamped instead.
pub const MAX_RESAMPLES: usize = 10;

fn sym<R: Rng>(rng: &mut R, half: f64) -> f64 {
    if half == 0.0 {
        0.0
    } else {
        rng.random_range(-half..=half)
    }
}

fn perturb<R: Rng>(model: &SkeletonModel, base: &SkeletonPose, r: &PerturbationRanges, rng: &mut R) -> SkeletonPose {
    let mut p = base.clone();
    for (a, def) in p.angles.iter_mut().zip(&model.joints) {
        for (x, (lo, hi)) in a.iter_mut().zip(def.limits) {
            if lo < hi {
                *x += sym(rng, r.joint_angle);
            }
        }
    }
    p.global.rotation[0] += sym(rng, r.yaw);
    p.global.rotation[1] += sym(rng, r.pitch);
    p.global.rotation[2] += sym(rng, r.roll);
    p.global.translation[0] += sym(rng, r.translation);
    p.global.translation[1] += sym(rng, r.translation);
    p.scale *= 1.0 + sym(rng, r.scale);
    for s in p.bone_scales.iter_mut() {
        *s *= 1.0 + sym(rng, r.bone_length);
    }
    p
}

/// Draw `count` poses: a uniformly chosen library pose, perturbed within
/// `ranges`, then grounded. Pose `i` uses its own stream, so the list is
/// the same however it is computed.
pub fn sample_poses(
    model: &SkeletonModel,
    library: &[LibraryPose],
    ranges: &PerturbationRanges,
    count: usize,
    seed: u64,
) -> Result<Vec<SkeletonPose>> {
    if library.is_empty() {
        return Err(Error::Pose("pose library is empty".into()));
    }
    ranges.validate()?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "pose", &[i as u64]);
            let base = &library[rng.random_range(0..library.len())].pose;
            if ranges.is_zero() {
                return base.clone();
            }
            let mut pose = perturb(model, base, ranges, &mut rng);
            let mut tries = 1;
            while pose.validate(model).is_err() && tries < MAX_RESAMPLES {
                pose = perturb(model, base, ranges, &mut rng);
                tries += 1;
            }
            pose.clamp_to(model);
            ground(model, &mut pose);
            pose
        })
        .collect())
}
