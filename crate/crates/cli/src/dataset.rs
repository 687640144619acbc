//! Rendered image sets on disk: one directory per set holding
//! `NNNNNN.depth`, `NNNNNN.labels` and `NNNNNN.json` per image.

use std::fs;
use std::path::{Path, PathBuf};

use discforest_mouse::imageio::{
    read_depth, read_labels, read_sidecar, write_depth, write_labels, write_sidecar, Sidecar, DEFAULT_DEPTH_SCALE,
};
use discforest_mouse::pipeline::ImageSets;
use discforest_mouse::{Camera, SyntheticImage};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SET_NAMES: [&str; 3] = ["train", "disc", "test"];

fn stem(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("{i:06}"))
}

pub fn write_set(images: &[SyntheticImage], camera: &Camera, noise_sigma: f64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, img) in images.iter().enumerate() {
        let s = stem(dir, i);
        write_depth(&img.depth, DEFAULT_DEPTH_SCALE, &s.with_extension("depth"))?;
        write_labels(&img.labels, &s.with_extension("labels"))?;
        write_sidecar(&Sidecar::new(img, camera, noise_sigma), &s.with_extension("json"))?;
    }
    Ok(())
}

/// Read every image of a set, in index order. Returns the images and the
/// camera recorded with them.
pub fn read_set(dir: &Path) -> Result<(Vec<SyntheticImage>, Option<Camera>)> {
    let mut sidecars: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read image set {}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    sidecars.sort();
    let mut camera = None;
    let mut images = Vec::with_capacity(sidecars.len());
    for sc in sidecars {
        let side = read_sidecar(&sc)?;
        if camera.is_some_and(|c| c != side.camera) {
            return Err(CliError::data(format!("{} uses a different camera", sc.display())));
        }
        camera = Some(side.camera);
        let depth = read_depth(&sc.with_extension("depth"), side.camera.floor_depth() as f32)?;
        let labels = read_labels(&sc.with_extension("labels"))?;
        if (depth.width, depth.height) != (side.camera.width, side.camera.height)
            || (labels.width, labels.height) != (depth.width, depth.height)
        {
            return Err(CliError::data(format!("{}: image size does not match its camera", sc.display())));
        }
        images.push(SyntheticImage {
            joints: side.joint_points(),
            pose: side.pose,
            depth,
            labels,
        });
    }
    Ok((images, camera))
}

pub fn write_sets(sets: &ImageSets, camera: &Camera, noise_sigma: f64, root: &Path) -> Result<()> {
    for (name, set) in SET_NAMES.iter().zip([&sets.train, &sets.disc, &sets.test]) {
        write_set(set, camera, noise_sigma, &root.join(name))?;
    }
    Ok(())
}

pub fn read_sets(root: &Path) -> Result<(ImageSets, Camera)> {
    let (train, c1) = read_set(&root.join("train"))?;
    let (disc, c2) = read_set(&root.join("disc"))?;
    let (test, c3) = read_set(&root.join("test"))?;
    let cams: Vec<Camera> = [c1, c2, c3].into_iter().flatten().collect();
    let camera = *cams
        .first()
        .ok_or_else(|| CliError::data(format!("{} holds no images", root.display())))?;
    if cams.iter().any(|c| *c != camera) {
        return Err(CliError::data("image sets use different cameras"));
    }
    if train.is_empty() || test.is_empty() {
        return Err(CliError::data("train and test sets must not be empty"));
    }
    Ok((ImageSets { train, disc, test }, camera))
}

/// Content hash of image sets: depth values and labels of every image.
pub fn hash_sets(sets: &ImageSets) -> String {
    let mut h = Sha256::new();
    for set in [&sets.train, &sets.disc, &sets.test] {
        h.update((set.len() as u64).to_le_bytes());
        for img in set {
            for v in &img.depth.values {
                h.update(v.to_le_bytes());
            }
            h.update(img.labels.values.iter().map(|l| l.id()).collect::<Vec<u8>>());
        }
    }
    hex::encode(h.finalize())
}
