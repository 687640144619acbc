//! Rendered image sets with their ground truth.

use discforest::rng::stream;
use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::Result;
use crate::noise::add_noise;
use crate::poses::{default_library, sample_poses, PerturbationRanges};
use crate::render::{render, DepthImage, LabelImage};
use crate::skeleton::{forward_kinematics, SkeletonModel, SkeletonPose};

/// One rendered frame: noisy depth, clean labels, the pose and its 24 joint
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub depth: DepthImage,
    pub labels: LabelImage,
    pub pose: SkeletonPose,
    pub joints: Vec<Point3<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub camera: Camera,
    pub ranges: PerturbationRanges,
    /// Depth noise (mm) added after rendering.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            camera: Camera::desk(),
            ranges: PerturbationRanges::default(),
            noise_sigma: 0.0,
        }
    }
}

/// Render one pose; noise, if any, is drawn from `(seed, "noise", [index])`.
pub fn render_pose(
    model: &SkeletonModel,
    pose: &SkeletonPose,
    camera: &Camera,
    noise_sigma: f64,
    seed: u64,
    index: usize,
) -> Result<SyntheticImage> {
    let posed = forward_kinematics(model, pose)?;
    let (clean, labels) = render(model, &posed, camera)?;
    let mut rng = stream(seed, "noise", &[index as u64]);
    let depth = add_noise(&clean, noise_sigma, &mut rng)?;
    Ok(SyntheticImage {
        depth,
        labels,
        pose: pose.clone(),
        joints: posed.positions,
    })
}

/// Render `poses` in parallel.
pub fn render_poses(
    model: &SkeletonModel,
    poses: &[SkeletonPose],
    camera: &Camera,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<SyntheticImage>> {
    poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| render_pose(model, p, camera, noise_sigma, seed, i))
        .collect()
}

/// Sample `count` poses from the default library and render them. Poses
/// come from `(seed, "pose", ..)`, noise from `(seed, "noise", ..)`.
pub fn generate(model: &SkeletonModel, config: &SynthConfig, count: usize, seed: u64) -> Result<Vec<SyntheticImage>> {
    let library = default_library(model);
    let poses = sample_poses(model, &library, &config.ranges, count, seed)?;
    render_poses(model, &poses, &config.camera, config.noise_sigma, seed)
}

/// Re-noise the clean renders of `images` at a new level.
pub fn with_noise(
    model: &SkeletonModel,
    images: &[SyntheticImage],
    camera: &Camera,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<SyntheticImage>> {
    let poses: Vec<SkeletonPose> = images.iter().map(|i| i.pose.clone()).collect();
    render_poses(model, &poses, camera, noise_sigma, seed)
}
