//! Capsule ray casting into depth and part-label images.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::skeleton::{PosedSkeleton, Region, SkeletonModel};

/// Per-pixel body part. The discriminant is the class id used by the
/// labeling forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum PartLabel {
    Head = 0,
    FrontRight = 1,
    FrontLeft = 2,
    RearRight = 3,
    RearLeft = 4,
    Tail = 5,
    Background = 6,
}

pub const NUM_PARTS: usize = 6;

impl PartLabel {
    pub const ALL: [PartLabel; 7] = [
        PartLabel::Head,
        PartLabel::FrontRight,
        PartLabel::FrontLeft,
        PartLabel::RearRight,
        PartLabel::RearLeft,
        PartLabel::Tail,
        PartLabel::Background,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<PartLabel> {
        PartLabel::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PartLabel::Head => "head",
            PartLabel::FrontRight => "frontRight",
            PartLabel::FrontLeft => "frontLeft",
            PartLabel::RearRight => "rearRight",
            PartLabel::RearLeft => "rearLeft",
            PartLabel::Tail => "tail",
            PartLabel::Background => "background",
        }
    }

    /// Left/right counterpart.
    pub fn mirrored(self) -> PartLabel {
        match self {
            PartLabel::FrontRight => PartLabel::FrontLeft,
            PartLabel::FrontLeft => PartLabel::FrontRight,
            PartLabel::RearRight => PartLabel::RearLeft,
            PartLabel::RearLeft => PartLabel::RearRight,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    /// Row-major depth (mm) from the camera.
    pub values: Vec<f32>,
    pub background: f32,
}

impl DepthImage {
    pub fn blank(width: usize, height: usize, background: f32) -> Self {
        DepthImage {
            width,
            height,
            values: vec![background; width * height],
            background,
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    /// Depth at possibly out-of-range integer coordinates; outside reads as
    /// background.
    #[inline]
    pub fn probe(&self, u: i64, v: i64) -> f32 {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 {
            self.background
        } else {
            self.values[v as usize * self.width + u as usize]
        }
    }

    #[inline]
    pub fn is_foreground(&self, u: usize, v: usize) -> bool {
        self.get(u, v) < self.background
    }

    pub fn foreground(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.height {
            for u in 0..self.width {
                if self.is_foreground(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<PartLabel>,
}

impl LabelImage {
    pub fn blank(width: usize, height: usize) -> Self {
        LabelImage {
            width,
            height,
            values: vec![PartLabel::Background; width * height],
        }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> PartLabel {
        self.values[v * self.width + u]
    }

    pub fn count(&self, label: PartLabel) -> usize {
        self.values.iter().filter(|&&l| l == label).count()
    }

    pub fn foreground_mask(&self) -> Vec<bool> {
        self.values.iter().map(|&l| l != PartLabel::Background).collect()
    }
}

/// One swept sphere along a bone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
    pub region: Region,
    /// Left axis of the bone's frame, for splitting midline regions.
    pub left: Vector3<f64>,
}

impl Capsule {
    /// Nearest ray parameter `t > 0` at which `origin + t * dir` meets the
    /// capsule surface, for an origin outside the capsule. `dir` need not be
    /// normalised. The capsule is the union of a finite cylinder and two
    /// end spheres, so the first hit is the least of their first hits.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let r2 = self.radius * self.radius;
        let mut best = f64::INFINITY;
        for c in [self.a, self.b] {
            if let Some(t) = sphere_hit(origin, dir, &c, r2) {
                best = best.min(t);
            }
        }
        let ba = self.b - self.a;
        let oa = origin - self.a;
        let baba = ba.dot(&ba);
        let bard = ba.dot(dir);
        let baoa = ba.dot(&oa);
        let rdoa = dir.dot(&oa);
        let oaoa = oa.dot(&oa);
        let rdrd = dir.dot(dir);
        let qa = baba * rdrd - bard * bard;
        if qa > 1e-12 * baba * rdrd {
            let qb = baba * rdoa - baoa * bard;
            let qc = baba * oaoa - baoa * baoa - r2 * baba;
            let h = qb * qb - qa * qc;
            if h >= 0.0 {
                let t = (-qb - h.sqrt()) / qa;
                let y = baoa + t * bard;
                if t > 0.0 && y > 0.0 && y < baba {
                    best = best.min(t);
                }
            }
        }
        best.is_finite().then_some(best)
    }

    /// Closest point of the bone segment to `p`.
    pub fn closest_on_axis(&self, p: &Point3<f64>) -> Point3<f64> {
        let ba = self.b - self.a;
        let len2 = ba.dot(&ba);
        if len2 == 0.0 {
            return self.a;
        }
        let s = ((p - self.a).dot(&ba) / len2).clamp(0.0, 1.0);
        self.a + ba * s
    }

    /// Part label of a surface point of this capsule.
    pub fn label_at(&self, hit: &Point3<f64>) -> PartLabel {
        let left = || (hit - self.closest_on_axis(hit)).dot(&self.left) > 0.0;
        match self.region {
            Region::Head => PartLabel::Head,
            Region::Tail => PartLabel::Tail,
            Region::FrontLeft => PartLabel::FrontLeft,
            Region::FrontRight => PartLabel::FrontRight,
            Region::RearLeft => PartLabel::RearLeft,
            Region::RearRight => PartLabel::RearRight,
            Region::ForeBody => {
                if left() {
                    PartLabel::FrontLeft
                } else {
                    PartLabel::FrontRight
                }
            }
            Region::HindBody => {
                if left() {
                    PartLabel::RearLeft
                } else {
                    PartLabel::RearRight
                }
            }
        }
    }
}

fn sphere_hit(origin: &Point3<f64>, dir: &Vector3<f64>, centre: &Point3<f64>, r2: f64) -> Option<f64> {
    let oc = origin - centre;
    let a = dir.dot(dir);
    let b = oc.dot(dir);
    let c = oc.dot(&oc) - r2;
    let h = b * b - a * c;
    if h < 0.0 {
        return None;
    }
    let t = (-b - h.sqrt()) / a;
    (t > 0.0).then_some(t)
}

/// One capsule per bone of the posed skeleton, in joint order.
pub fn capsules(model: &SkeletonModel, posed: &PosedSkeleton) -> Vec<Capsule> {
    model
        .joints
        .iter()
        .enumerate()
        .filter_map(|(j, def)| {
            let p = def.parent?;
            Some(Capsule {
                a: posed.positions[p],
                b: posed.positions[j],
                radius: def.radius * posed.scale,
                region: def.region,
                left: posed.left_axes[j],
            })
        })
        .collect()
}

/// Depth and labels from one pass. Ties in depth go to the earlier
/// capsule; hits at or beyond the floor are ignored.
pub fn render_capsules(capsules: &[Capsule], camera: &Camera) -> Result<(DepthImage, LabelImage)> {
    let origin = camera.origin();
    for c in capsules {
        let top = c.a.z.max(c.b.z) + c.radius;
        if !(top < camera.elevation) {
            return Err(Error::Render(format!(
                "geometry reaches z = {top:.3} mm, at or above the camera at {}",
                camera.elevation
            )));
        }
    }
    let floor = camera.floor_depth();
    let mut depth = DepthImage::blank(camera.width, camera.height, floor as f32);
    let mut labels = LabelImage::blank(camera.width, camera.height);
    for v in 0..camera.height {
        for u in 0..camera.width {
            let dir = camera.ray(u, v);
            let mut best: Option<(f64, usize)> = None;
            for (k, c) in capsules.iter().enumerate() {
                if let Some(t) = c.intersect(&origin, &dir) {
                    if t < floor && best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, k));
                    }
                }
            }
            if let Some((t, k)) = best {
                let i = v * camera.width + u;
                let stored = t as f32;
                // Keep the mask exact: a hit just above the floor must not
                // round up onto the background value.
                depth.values[i] = if stored < depth.background {
                    stored
                } else {
                    f32::from_bits(depth.background.to_bits() - 1)
                };
                labels.values[i] = capsules[k].label_at(&(origin + dir * t));
            }
        }
    }
    Ok((depth, labels))
}

pub fn render(model: &SkeletonModel, posed: &PosedSkeleton, camera: &Camera) -> Result<(DepthImage, LabelImage)> {
    render_capsules(&capsules(model, posed), camera)
}

pub fn render_depth(model: &SkeletonModel, posed: &PosedSkeleton, camera: &Camera) -> Result<DepthImage> {
    Ok(render(model, posed, camera)?.0)
}

pub fn render_labels(model: &SkeletonModel, posed: &PosedSkeleton, camera: &Camera) -> Result<LabelImage> {
    Ok(render(model, posed, camera)?.1)
}
