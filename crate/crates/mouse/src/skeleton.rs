//! The 24-joint kinematic mouse and forward kinematics.
//!
//! Joints are stored 0-based; joint `Jn` of the usual numbering lives at
//! index `n - 1`. Body frame: x forward, y to the animal's left, z up.

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 24;
/// Joints visible from the top camera and regressed by the forest: spine
/// and tail (J1-J8), ears (J9-J10), hips (J11-J12).
pub const NUM_MAIN_JOINTS: usize = 12;
pub const ROOT: usize = 4;
/// Height of the root joint above the floor in the rest pose (mm).
pub const REST_ROOT_HEIGHT: f64 = 22.0;

/// Proximity radii ε_j (mm) for the main joints: 25 for the spine, 50 for
/// the tail, 15 for ears and hips.
pub const MAIN_RADII: [f64; NUM_MAIN_JOINTS] = [
    25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 50.0, 50.0, 15.0, 15.0, 15.0, 15.0,
];

/// Body region a bone's surface belongs to. Left/right splits of the spine
/// are decided per surface point by the side of the spine plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Head,
    ForeBody,
    HindBody,
    Tail,
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDef {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest bone vector from the parent, in the parent-composed frame (mm).
    pub offset: [f64; 3],
    /// Radius of the capsule drawn along the bone ending at this joint.
    pub radius: f64,
    pub region: Region,
    /// Limits for yaw (about z), pitch (about y) and roll (about x), rad.
    pub limits: [(f64, f64); 3],
    /// Left/right counterpart, or itself on the midline.
    pub mirror: usize,
}

impl JointDef {
    pub fn bone_length(&self) -> f64 {
        Vector3::from(self.offset).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonModel {
    pub joints: Vec<JointDef>,
}

const SPINE: [(f64, f64); 3] = [(-0.6, 0.6), (-0.5, 0.5), (-0.3, 0.3)];
const TAIL: [(f64, f64); 3] = [(-1.0, 1.0), (-0.6, 0.6), (0.0, 0.0)];
const EAR: [(f64, f64); 3] = [(-0.3, 0.3), (-0.3, 0.3), (-0.3, 0.3)];
const HIP: [(f64, f64); 3] = [(-0.2, 0.2), (-0.2, 0.2), (-0.2, 0.2)];
const LIMB: [(f64, f64); 3] = [(-0.3, 0.3), (-0.9, 0.9), (-0.3, 0.3)];
const FIXED: [(f64, f64); 3] = [(0.0, 0.0); 3];

impl SkeletonModel {
    /// The frozen rest model: nose to tail base is 100 mm at scale 1.
    pub fn mouse() -> Self {
        use Region::*;
        let j = |name: &str, parent: Option<usize>, offset: [f64; 3], radius, region, limits, mirror| JointDef {
            name: name.to_string(),
            parent,
            offset,
            radius,
            region,
            limits,
            mirror,
        };
        let joints = vec![
            j("nose", Some(1), [20.0, 0.0, 0.0], 6.5, Head, SPINE, 0),
            j("head", Some(2), [15.0, 0.0, 0.0], 9.0, ForeBody, SPINE, 1),
            j("neck", Some(3), [15.0, 0.0, 0.0], 11.0, ForeBody, SPINE, 2),
            j("thorax", Some(4), [15.0, 0.0, 0.0], 12.0, ForeBody, SPINE, 3),
            j("mid-back", None, [0.0, 0.0, 0.0], 0.0, ForeBody, FIXED, 4),
            j("tail-base", Some(4), [-35.0, 0.0, 0.0], 12.0, HindBody, SPINE, 5),
            j("tail-mid", Some(5), [-25.0, 0.0, -4.0], 2.5, Tail, TAIL, 6),
            j("tail-tip", Some(6), [-25.0, 0.0, -4.0], 2.0, Tail, TAIL, 7),
            j("ear-left", Some(1), [-3.0, 7.0, 7.0], 3.5, Head, EAR, 9),
            j("ear-right", Some(1), [-3.0, -7.0, 7.0], 3.5, Head, EAR, 8),
            j("hip-left", Some(5), [5.0, 8.0, -6.0], 5.0, RearLeft, HIP, 11),
            j("hip-right", Some(5), [5.0, -8.0, -6.0], 5.0, RearRight, HIP, 10),
            j("shoulder-left", Some(2), [-2.0, 8.0, -7.0], 4.0, FrontLeft, HIP, 14),
            j("elbow-left", Some(12), [-4.0, 0.0, -7.0], 3.0, FrontLeft, LIMB, 15),
            j("shoulder-right", Some(2), [-2.0, -8.0, -7.0], 4.0, FrontRight, HIP, 12),
            j("elbow-right", Some(14), [-4.0, 0.0, -7.0], 3.0, FrontRight, LIMB, 13),
            j("knee-left", Some(10), [7.0, 0.0, -7.0], 3.5, RearLeft, LIMB, 18),
            j("ankle-left", Some(16), [-5.0, 0.0, -5.0], 2.5, RearLeft, LIMB, 19),
            j("knee-right", Some(11), [7.0, 0.0, -7.0], 3.5, RearRight, LIMB, 16),
            j("ankle-right", Some(18), [-5.0, 0.0, -5.0], 2.5, RearRight, LIMB, 17),
            j("forepaw-left", Some(13), [4.0, 0.0, -6.0], 2.0, FrontLeft, LIMB, 21),
            j("forepaw-right", Some(15), [4.0, 0.0, -6.0], 2.0, FrontRight, LIMB, 20),
            j("hindpaw-left", Some(17), [3.0, 0.0, -3.0], 2.0, RearLeft, FIXED, 23),
            j("hindpaw-right", Some(19), [3.0, 0.0, -3.0], 2.0, RearRight, FIXED, 22),
        ];
        SkeletonModel { joints }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    pub fn bone_length(&self, j: usize) -> f64 {
        self.joints[j].bone_length()
    }

    /// Joint indices ordered so every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.joints.len();
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            let before = order.len();
            for j in 0..n {
                if placed[j] {
                    continue;
                }
                if self.joints[j].parent.is_none_or(|p| placed[p]) {
                    placed[j] = true;
                    order.push(j);
                }
            }
            if order.len() == before {
                break;
            }
        }
        order
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.len() != NUM_JOINTS {
            return Err(Error::Model(format!("expected {NUM_JOINTS} joints, found {}", self.joints.len())));
        }
        let roots = self.joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(Error::Model(format!("expected one root, found {roots}")));
        }
        if self.topological_order().len() != NUM_JOINTS {
            return Err(Error::Model("joint parents form a cycle".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= NUM_JOINTS {
                    return Err(Error::Model(format!("joint {} has parent {p} out of range", i + 1)));
                }
                if !(j.bone_length() > 0.0) {
                    return Err(Error::Model(format!("joint {} has a zero-length bone", i + 1)));
                }
            }
            if self.joints[j.mirror].mirror != i {
                return Err(Error::Model(format!("joint {} has an inconsistent mirror", i + 1)));
            }
        }
        Ok(())
    }
}

/// Rotation about z (yaw), then y (pitch), then x (roll), composed as
/// `Rz * Ry * Rx`.
pub fn ypr(angles: [f64; 3]) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), angles[0])
        * Rotation3::from_axis_angle(&Vector3::y_axis(), angles[1])
        * Rotation3::from_axis_angle(&Vector3::x_axis(), angles[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalTransform {
    /// Yaw, pitch, roll (rad) of the whole body.
    pub rotation: [f64; 3],
    /// Root position (mm).
    pub translation: [f64; 3],
}

impl Default for GlobalTransform {
    fn default() -> Self {
        GlobalTransform {
            rotation: [0.0; 3],
            translation: [0.0, 0.0, REST_ROOT_HEIGHT],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPose {
    /// Per-joint yaw, pitch, roll (rad) applied to the bone ending at the
    /// joint and everything below it.
    pub angles: Vec<[f64; 3]>,
    pub global: GlobalTransform,
    pub scale: f64,
    /// Per-bone length multipliers on top of `scale`.
    pub bone_scales: Vec<f64>,
}

impl Default for SkeletonPose {
    fn default() -> Self {
        SkeletonPose {
            angles: vec![[0.0; 3]; NUM_JOINTS],
            global: GlobalTransform::default(),
            scale: 1.0,
            bone_scales: vec![1.0; NUM_JOINTS],
        }
    }
}

impl SkeletonPose {
    pub fn validate(&self, model: &SkeletonModel) -> Result<()> {
        if self.angles.len() != model.len() || self.bone_scales.len() != model.len() {
            return Err(Error::Pose("pose does not match the model's joint count".into()));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Pose(format!("scale must be positive, got {}", self.scale)));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.global.rotation) || !finite(&self.global.translation) {
            return Err(Error::Pose("global transform is not finite".into()));
        }
        for (j, (a, def)) in self.angles.iter().zip(&model.joints).enumerate() {
            for k in 0..3 {
                let (lo, hi) = def.limits[k];
                if !(a[k] >= lo && a[k] <= hi) {
                    return Err(Error::Pose(format!(
                        "joint {} angle {k} = {} outside [{lo}, {hi}]",
                        j + 1,
                        a[k]
                    )));
                }
            }
            if !(self.bone_scales[j] > 0.0) || !self.bone_scales[j].is_finite() {
                return Err(Error::Pose(format!("joint {} bone scale must be positive", j + 1)));
            }
        }
        Ok(())
    }

    /// Clamp every angle into its limits.
    pub fn clamp_to(&mut self, model: &SkeletonModel) {
        for (a, def) in self.angles.iter_mut().zip(&model.joints) {
            for k in 0..3 {
                let (lo, hi) = def.limits[k];
                a[k] = a[k].clamp(lo, hi);
            }
        }
    }
}

/// Joint positions plus, per joint, the unit "left" axis of its frame.
/// The left axis decides which side of the spine plane a surface point is
/// on.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedSkeleton {
    pub positions: Vec<Point3<f64>>,
    pub left_axes: Vec<Vector3<f64>>,
    /// Overall body scale; capsule radii grow with it.
    pub scale: f64,
}

impl PosedSkeleton {
    pub fn main_joints(&self) -> &[Point3<f64>] {
        &self.positions[..NUM_MAIN_JOINTS]
    }

    /// Reflection through the plane y = 0 with left and right swapped.
    pub fn mirrored(&self, model: &SkeletonModel) -> PosedSkeleton {
        let n = self.positions.len();
        let mut positions = vec![Point3::origin(); n];
        let mut left_axes = vec![Vector3::zeros(); n];
        for j in 0..n {
            let m = model.joints[j].mirror;
            let p = self.positions[j];
            positions[m] = Point3::new(p.x, -p.y, p.z);
            let l = self.left_axes[j];
            left_axes[m] = Vector3::new(-l.x, l.y, -l.z);
        }
        PosedSkeleton {
            positions,
            left_axes,
            scale: self.scale,
        }
    }

    /// Rigid shift of every joint.
    pub fn translated(&self, t: Vector3<f64>) -> PosedSkeleton {
        PosedSkeleton {
            positions: self.positions.iter().map(|p| p + t).collect(),
            left_axes: self.left_axes.clone(),
            scale: self.scale,
        }
    }
}

/// Forward kinematics: the root sits at the global translation with the
/// global rotation; every other joint is its parent's position plus its
/// scaled rest bone vector rotated by the composed frame.
pub fn forward_kinematics(model: &SkeletonModel, pose: &SkeletonPose) -> Result<PosedSkeleton> {
    model.validate()?;
    pose.validate(model)?;
    Ok(fk_unchecked(model, pose))
}

pub(crate) fn fk_unchecked(model: &SkeletonModel, pose: &SkeletonPose) -> PosedSkeleton {
    let n = model.len();
    let mut frames = vec![Rotation3::identity(); n];
    let mut positions = vec![Point3::origin(); n];
    for j in model.topological_order() {
        let def = &model.joints[j];
        let local = ypr(pose.angles[j]);
        match def.parent {
            None => {
                frames[j] = ypr(pose.global.rotation) * local;
                positions[j] = Point3::from(pose.global.translation);
            }
            Some(p) => {
                frames[j] = frames[p] * local;
                let bone = Vector3::from(def.offset) * (pose.scale * pose.bone_scales[j]);
                positions[j] = positions[p] + frames[j] * bone;
            }
        }
    }
    let left_axes = frames.iter().map(|r| r * Vector3::y()).collect();
    PosedSkeleton {
        positions,
        left_axes,
        scale: pose.scale,
    }
}
