//! Depth pixels as forest examples.

use discforest::rng::stream;
use discforest::{ClassTargets, Dataset, Feature, OffsetTargets};
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::render::{DepthImage, LabelImage, PartLabel, NUM_PARTS};
use crate::skeleton::NUM_MAIN_JOINTS;
use crate::synth::SyntheticImage;

/// Depth difference between the pixel and a probe displaced by `offset`
/// millimetres at the pixel's depth (`offset * focal / depth` pixels).
/// Probes outside the image read the background depth.
#[inline]
pub fn depth_feature(image: &DepthImage, focal: f64, u: usize, v: usize, offset: [f64; 2]) -> f64 {
    let d = f64::from(image.get(u, v));
    let k = focal / d;
    let pu = (u as f64 + 0.5 + offset[0] * k).floor() as i64;
    let pv = (v as f64 + 0.5 + offset[1] * k).floor() as i64;
    f64::from(image.probe(pu, pv)) - d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelExample {
    pub image: u32,
    pub u: u16,
    pub v: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PixelTargets {
    None,
    /// `NUM_MAIN_JOINTS` offsets (mm) per example, example-major.
    Offsets(Vec<[f64; 3]>),
    Labels(Vec<u8>),
}

/// Sampled foreground pixels over a set of depth images, with optional
/// regression or part-label targets.
#[derive(Debug, Clone)]
pub struct PixelSet<'a> {
    pub images: Vec<&'a DepthImage>,
    pub camera: Camera,
    pub examples: Vec<PixelExample>,
    pub targets: PixelTargets,
}

/// Up to `n_per_image` distinct foreground pixels of each image, drawn
/// uniformly from `(seed, "pixels", [image])`, in raster order. Images
/// without foreground contribute nothing.
pub fn sample_pixel_locations(images: &[&DepthImage], n_per_image: usize, seed: u64) -> Vec<PixelExample> {
    let per_image: Vec<Vec<PixelExample>> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let fg = img.foreground();
            if fg.is_empty() {
                log::warn!("image {i} has no foreground pixels; skipped");
                return Vec::new();
            }
            let chosen: Vec<usize> = if n_per_image >= fg.len() {
                (0..fg.len()).collect()
            } else {
                let mut rng = stream(seed, "pixels", &[i as u64]);
                let mut idx = sample(&mut rng, fg.len(), n_per_image).into_vec();
                idx.sort_unstable();
                idx
            };
            chosen
                .into_iter()
                .map(|k| PixelExample {
                    image: i as u32,
                    u: fg[k].0 as u16,
                    v: fg[k].1 as u16,
                })
                .collect()
        })
        .collect();
    per_image.into_iter().flatten().collect()
}

impl<'a> PixelSet<'a> {
    pub fn unlabeled(images: Vec<&'a DepthImage>, camera: Camera, examples: Vec<PixelExample>) -> Self {
        PixelSet {
            images,
            camera,
            examples,
            targets: PixelTargets::None,
        }
    }

    /// Every foreground pixel of one image, in raster order.
    pub fn whole_image(image: &'a DepthImage, camera: Camera) -> Self {
        let examples = image
            .foreground()
            .into_iter()
            .map(|(u, v)| PixelExample {
                image: 0,
                u: u as u16,
                v: v as u16,
            })
            .collect();
        PixelSet::unlabeled(vec![image], camera, examples)
    }

    /// Pixels with offsets to the main joints of each image.
    pub fn regression(images: &'a [SyntheticImage], camera: Camera, n_per_image: usize, seed: u64) -> Self {
        let depths: Vec<&DepthImage> = images.iter().map(|i| &i.depth).collect();
        let examples = sample_pixel_locations(&depths, n_per_image, seed);
        let mut offsets = Vec::with_capacity(examples.len() * NUM_MAIN_JOINTS);
        for e in &examples {
            let img = &images[e.image as usize];
            let p = camera.backproject(e.u as usize, e.v as usize, f64::from(img.depth.get(e.u as usize, e.v as usize)));
            for j in 0..NUM_MAIN_JOINTS {
                let o = img.joints[j] - p;
                offsets.push([o.x, o.y, o.z]);
            }
        }
        PixelSet {
            images: depths,
            camera,
            examples,
            targets: PixelTargets::Offsets(offsets),
        }
    }

    /// Pixels with their part labels.
    pub fn labeling(images: &'a [SyntheticImage], camera: Camera, n_per_image: usize, seed: u64) -> Self {
        let depths: Vec<&DepthImage> = images.iter().map(|i| &i.depth).collect();
        let examples = sample_pixel_locations(&depths, n_per_image, seed);
        let labels = examples
            .iter()
            .map(|e| {
                let l: &LabelImage = &images[e.image as usize].labels;
                let label = l.get(e.u as usize, e.v as usize);
                debug_assert_ne!(label, PartLabel::Background);
                label.id()
            })
            .collect();
        PixelSet {
            images: depths,
            camera,
            examples,
            targets: PixelTargets::Labels(labels),
        }
    }

    pub fn image_of(&self, index: usize) -> &DepthImage {
        self.images[self.examples[index].image as usize]
    }

    pub fn depth(&self, index: usize) -> f64 {
        let e = self.examples[index];
        f64::from(self.image_of(index).get(e.u as usize, e.v as usize))
    }

    /// 3D point seen at example `index`.
    pub fn point(&self, index: usize) -> nalgebra::Point3<f64> {
        let e = self.examples[index];
        self.camera.backproject(e.u as usize, e.v as usize, self.depth(index))
    }
}

impl Dataset<f64> for PixelSet<'_> {
    fn len(&self) -> usize {
        self.examples.len()
    }

    fn feature_value(&self, index: usize, feature: &Feature<f64>) -> f64 {
        let e = self.examples[index];
        match feature {
            Feature::DepthOffset { u } => {
                depth_feature(self.image_of(index), self.camera.focal, e.u as usize, e.v as usize, *u)
            }
            Feature::Axis2D(_) => panic!("pixel examples only support depth-offset features"),
        }
    }
}

impl OffsetTargets<f64> for PixelSet<'_> {
    fn num_joints(&self) -> usize {
        NUM_MAIN_JOINTS
    }

    fn offset(&self, index: usize, joint: usize) -> [f64; 3] {
        match &self.targets {
            PixelTargets::Offsets(o) => o[index * NUM_MAIN_JOINTS + joint],
            _ => panic!("pixel set has no offset targets"),
        }
    }
}

impl ClassTargets for PixelSet<'_> {
    fn num_classes(&self) -> usize {
        NUM_PARTS
    }

    fn label(&self, index: usize) -> usize {
        match &self.targets {
            PixelTargets::Labels(l) => l[index] as usize,
            _ => panic!("pixel set has no label targets"),
        }
    }
}
