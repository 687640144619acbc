//! Completing a full skeleton from the main-body joints and paw positions.
//!
//! Fore limbs: the shoulder hangs off the neck in a body frame
//! estimated from the main joints, then elbow and paw follow from two-bone
//! IK. Hind limbs: the hip is the anchor; knee, ankle and paw are
//! solved with the knee-ankle-paw angle held at 90 degrees, which fixes the
//! knee-to-paw distance and reduces the chain to two bones.

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{SkeletonModel, SkeletonPose, NUM_JOINTS, NUM_MAIN_JOINTS};

/// Joint indices of one limb, from the body anchor down to the paw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimbJoints {
    /// Main-body joint the limb hangs from: the neck for fore limbs, the hip
    /// for hind limbs.
    pub anchor: usize,
    pub upper: usize,
    pub middle: usize,
    pub paw: usize,
}

pub const FORE_LEFT: LimbJoints = LimbJoints { anchor: 2, upper: 12, middle: 13, paw: 20 };
pub const FORE_RIGHT: LimbJoints = LimbJoints { anchor: 2, upper: 14, middle: 15, paw: 21 };
pub const HIND_LEFT: LimbJoints = LimbJoints { anchor: 10, upper: 16, middle: 17, paw: 22 };
pub const HIND_RIGHT: LimbJoints = LimbJoints { anchor: 11, upper: 18, middle: 19, paw: 23 };
/// Paw order used by [`ik_fuse`]: fore left, fore right, hind left, hind right.
pub const LIMBS: [LimbJoints; 4] = [FORE_LEFT, FORE_RIGHT, HIND_LEFT, HIND_RIGHT];

/// Bone lengths (mm) of the four limbs at a given body size. For each limb:
/// anchor→upper, upper→middle, middle→paw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimbChains {
    pub lengths: [[f64; 3]; 4],
    /// Rest offsets of every joint, scaled; used for the shoulder and for
    /// default completion.
    #[serde(skip)]
    offsets: [[f64; 3]; NUM_JOINTS],
}

impl LimbChains {
    /// Lengths of `model` at overall scale `scale`.
    pub fn at_scale(model: &SkeletonModel, scale: f64) -> Self {
        let pose = SkeletonPose {
            scale,
            ..SkeletonPose::default()
        };
        Self::for_pose(model, &pose)
    }

    /// Lengths including the pose's scale and per-bone scales.
    pub fn for_pose(model: &SkeletonModel, pose: &SkeletonPose) -> Self {
        let mut offsets = [[0.0; 3]; NUM_JOINTS];
        for (j, def) in model.joints.iter().enumerate() {
            let s = pose.scale * pose.bone_scales[j];
            offsets[j] = [def.offset[0] * s, def.offset[1] * s, def.offset[2] * s];
        }
        let len = |j: usize| Vector3::from(offsets[j]).norm();
        let mut lengths = [[0.0; 3]; 4];
        for (k, l) in LIMBS.iter().enumerate() {
            lengths[k] = [len(l.upper), len(l.middle), len(l.paw)];
        }
        LimbChains { lengths, offsets }
    }

    fn offset(&self, j: usize) -> Vector3<f64> {
        Vector3::from(self.offsets[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimbStatus {
    Solved,
    /// The paw was out of reach and was pulled onto the reachable shell.
    Clamped,
    /// No paw given; the limb takes its rest configuration.
    Default,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub joints: Vec<Point3<f64>>,
    pub status: [LimbStatus; 4],
}

/// Orthonormal frame with x along `forward` and y as close to `left` as
/// possible. Falls back to world axes when the hints are degenerate.
fn frame(forward: Vector3<f64>, left: Vector3<f64>) -> Rotation3<f64> {
    let x = forward.try_normalize(1e-12).unwrap_or_else(Vector3::x);
    let mut y = left - x * x.dot(&left);
    if y.norm() < 1e-9 {
        let alt = if x.z.abs() < 0.9 { Vector3::z() } else { Vector3::y() };
        y = alt.cross(&x);
    }
    let y = y.normalize();
    let z = x.cross(&y);
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
}

/// Fore-body frame at the neck: forward along the thorax→neck bone, left
/// from the ears.
fn fore_frame(main: &[Point3<f64>]) -> Rotation3<f64> {
    frame(main[2] - main[3], main[8] - main[9])
}

/// Hind-body frame at the tail base: forward from the tail base toward the
/// mid-back, left from the hips.
fn hind_frame(main: &[Point3<f64>]) -> Rotation3<f64> {
    frame(main[4] - main[5], main[10] - main[11])
}

/// Two-bone IK from `anchor` toward `target` with bone lengths `l1`, `l2`,
/// bending toward `pole`. Returns the middle joint, the reached end point
/// and whether the target had to be clamped onto the reachable shell.
pub fn two_bone(
    anchor: Point3<f64>,
    target: Point3<f64>,
    l1: f64,
    l2: f64,
    pole: Vector3<f64>,
) -> (Point3<f64>, Point3<f64>, bool) {
    let to = target - anchor;
    let d0 = to.norm();
    let dir = if d0 > 1e-12 {
        to / d0
    } else {
        -pole.try_normalize(1e-12).unwrap_or_else(Vector3::z)
    };
    let (lo, hi) = ((l1 - l2).abs(), l1 + l2);
    let d = d0.clamp(lo, hi);
    let clamped = d != d0;
    let end = if clamped { anchor + dir * d } else { target };
    let mut side = pole - dir * dir.dot(&pole);
    if side.norm() < 1e-9 {
        let alt = if dir.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        side = alt - dir * dir.dot(&alt);
    }
    let side = side.normalize();
    let cos_a = if d > 0.0 {
        ((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
    let middle = anchor + (dir * cos_a + side * sin_a) * l1;
    (middle, end, clamped)
}

/// Build all 24 joints from the 12 main joints and up to four paws (order
/// of [`LIMBS`]). Main joints are copied unchanged. Missing paws give the
/// limb its rest configuration in the estimated body frame.
pub fn ik_fuse(main: &[Point3<f64>], paws: &[Option<Point3<f64>>; 4], chains: &LimbChains) -> Result<IkResult> {
    if main.len() != NUM_MAIN_JOINTS {
        return Err(Error::Data(format!(
            "expected {NUM_MAIN_JOINTS} main joints, got {}",
            main.len()
        )));
    }
    if main.iter().chain(paws.iter().flatten()).any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::Data("joint positions must be finite".into()));
    }
    let mut joints = vec![Point3::origin(); NUM_JOINTS];
    joints[..NUM_MAIN_JOINTS].copy_from_slice(main);
    let fore = fore_frame(main);
    let hind = hind_frame(main);
    let mut status = [LimbStatus::Default; 4];

    for (k, limb) in LIMBS.iter().enumerate() {
        let is_fore = k < 2;
        let r = if is_fore { fore } else { hind };
        let forward = r * Vector3::x();
        // Rest position of the upper joint. For fore limbs this is also the
        // solved position: the shoulder is rigidly attached to the neck.
        let upper_rest = joints[limb.anchor] + r * chains.offset(limb.upper);
        match paws[k] {
            None => {
                let middle = upper_rest + r * chains.offset(limb.middle);
                joints[limb.upper] = upper_rest;
                joints[limb.middle] = middle;
                joints[limb.paw] = middle + r * chains.offset(limb.paw);
            }
            Some(paw) if is_fore => {
                let [_, l1, l2] = chains.lengths[k];
                // Elbows point backward.
                let (middle, end, clamped) = two_bone(upper_rest, paw, l1, l2, -forward);
                joints[limb.upper] = upper_rest;
                joints[limb.middle] = middle;
                joints[limb.paw] = end;
                status[k] = if clamped { LimbStatus::Clamped } else { LimbStatus::Solved };
            }
            Some(paw) => {
                let [a, b, c] = chains.lengths[k];
                let hyp = (b * b + c * c).sqrt();
                // Knees point forward; the ankle sits behind the knee-paw line.
                let (knee, end, clamped) = two_bone(joints[limb.anchor], paw, a, hyp, forward);
                let (ankle, _, _) = two_bone(knee, end, b, c, -forward);
                joints[limb.upper] = knee;
                joints[limb.middle] = ankle;
                joints[limb.paw] = end;
                status[k] = if clamped { LimbStatus::Clamped } else { LimbStatus::Solved };
            }
        }
    }
    Ok(IkResult { joints, status })
}
