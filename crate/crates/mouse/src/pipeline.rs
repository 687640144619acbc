//! End-to-end synthetic experiments: joint regression with and without
//! discriminative retraining, the depth-noise sweep, and part labeling.

use discforest::rng::{derive_seed, stream};
use discforest::{
    disc_train_forest, train_forest, ClassObjective, DiscParams, FeatureFamily, Forest, RegressionObjective,
    RetrainLog, TrainParams,
};
use nalgebra::Point3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::Result;
use crate::estimate::{
    estimate_joints, joint_error, part_label_image, ConfusionMatrix, JointEstimate, DEFAULT_QUERY_PIXELS,
};
use crate::ik::{ik_fuse, LimbChains, LimbStatus, LIMBS};
use crate::pixels::PixelSet;
use crate::poses::PerturbationRanges;
use crate::render::NUM_PARTS;
use crate::skeleton::{forward_kinematics, SkeletonModel, SkeletonPose, MAIN_RADII, NUM_JOINTS, NUM_MAIN_JOINTS};
use crate::synth::{generate, with_noise, SynthConfig, SyntheticImage};

/// Offset radius (mm) of the depth features used by both experiments.
pub const MAX_OFFSET_MM: f64 = 60.0;

/// Regression forest defaults: 7 trees, m = 100 features per node, l_n = 60,
/// L = 20, proximity radii per main joint.
pub fn pose_train_params(seed: u64) -> TrainParams<f64> {
    TrainParams {
        num_trees: 7,
        candidates: 100,
        leaf_capacity: 60,
        max_levels: 20,
        thresholds_per_feature: 5,
        radii: MAIN_RADII.to_vec(),
        eigen_bound: 100.0,
        leaf_weight: 10.0,
        family: FeatureFamily::DepthOffset {
            max_offset: MAX_OFFSET_MM,
        },
        bootstrap: false,
        seed,
    }
}

/// Part-labeling forest defaults: 7 trees, L = 13, l_n = 60.
pub fn label_train_params(seed: u64) -> TrainParams<f64> {
    TrainParams {
        num_trees: 7,
        candidates: 200,
        leaf_capacity: 60,
        max_levels: 13,
        thresholds_per_feature: 10,
        radii: Vec::new(),
        eigen_bound: 100.0,
        leaf_weight: 10.0,
        family: FeatureFamily::DepthOffset {
            max_offset: MAX_OFFSET_MM,
        },
        bootstrap: false,
        seed,
    }
}

pub const LABEL_OBJECTIVE: ClassObjective = ClassObjective { num_classes: NUM_PARTS };

/// Image sets for one experiment. Each set is rendered from its own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCounts {
    pub train: usize,
    pub disc: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseExperimentConfig {
    pub camera: Camera,
    pub ranges: PerturbationRanges,
    pub images: ImageCounts,
    /// Foreground pixels sampled per training / retraining image.
    pub pixels_per_image: usize,
    pub query_pixels: usize,
    pub train: TrainParams<f64>,
    pub disc: DiscParams,
    /// Noise levels (mm) of the test sweep.
    pub noise_levels: Vec<f64>,
    /// Per-axis paw jitter (mm) for the IK completion.
    pub paw_jitter: f64,
    pub seed: u64,
}

impl PoseExperimentConfig {
    /// 5000 training, 5000 retraining and 500 test images at 64x64.
    pub fn desk(seed: u64) -> Self {
        PoseExperimentConfig {
            camera: Camera::desk(),
            ranges: PerturbationRanges::default(),
            images: ImageCounts {
                train: 5000,
                disc: 5000,
                test: 500,
            },
            pixels_per_image: 20,
            query_pixels: DEFAULT_QUERY_PIXELS,
            train: pose_train_params(derive_seed(seed, "pose-train", &[])),
            disc: DiscParams::new(100, 60, derive_seed(seed, "pose-disc", &[])),
            noise_levels: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            paw_jitter: 2.0,
            seed,
        }
    }

    /// 240000 training images at 160x120.
    pub fn full(seed: u64) -> Self {
        let mut c = Self::desk(seed);
        c.camera = Camera::full();
        c.images = ImageCounts {
            train: 240_000,
            disc: 24_000,
            test: 2400,
        };
        c
    }
}

/// Rendered image sets of one experiment.
pub struct ImageSets {
    pub train: Vec<SyntheticImage>,
    pub disc: Vec<SyntheticImage>,
    pub test: Vec<SyntheticImage>,
}

pub fn render_sets(
    model: &SkeletonModel,
    camera: &Camera,
    ranges: &PerturbationRanges,
    counts: &ImageCounts,
    noise_sigma: f64,
    seed: u64,
) -> Result<ImageSets> {
    let config = SynthConfig {
        camera: *camera,
        ranges: *ranges,
        noise_sigma,
    };
    let set = |tag: &str, n: usize| generate(model, &config, n, derive_seed(seed, tag, &[]));
    Ok(ImageSets {
        train: set("train-images", counts.train)?,
        disc: set("disc-images", counts.disc)?,
        test: set("test-images", counts.test)?,
    })
}

/// Mean joint errors over a set of test images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JointErrorSummary {
    /// Mean error (mm) per main joint over the images where it was estimated.
    pub per_joint: Vec<f64>,
    /// Mean of `per_joint`.
    pub mean: f64,
    /// (image, joint) pairs without an estimate.
    pub missing: usize,
}

impl JointErrorSummary {
    /// Joint with the largest error and its value.
    pub fn worst(&self) -> (usize, f64) {
        self.per_joint
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (j, e)| if e > b.1 { (j, e) } else { b })
    }
}

/// Estimate the main joints of every image. Query pixels of image `i` come
/// from `derive_seed(seed, "query", [i])`.
pub fn estimate_all(
    forest: &Forest<f64>,
    images: &[SyntheticImage],
    camera: &Camera,
    query_pixels: usize,
    seed: u64,
) -> Result<Vec<JointEstimate>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| estimate_joints(forest, &img.depth, camera, query_pixels, derive_seed(seed, "query", &[i as u64])))
        .collect()
}

/// Average the joint errors of `estimates` against the images' truth.
pub fn summarize(estimates: &[JointEstimate], images: &[SyntheticImage]) -> Result<JointErrorSummary> {
    let mut sums = vec![0.0; NUM_MAIN_JOINTS];
    let mut counts = vec![0usize; NUM_MAIN_JOINTS];
    let mut missing = 0;
    for (est, img) in estimates.iter().zip(images) {
        let r = joint_error(est, &img.joints[..NUM_MAIN_JOINTS])?;
        for (j, e) in r.per_joint.iter().enumerate() {
            match e {
                Some(e) => {
                    sums[j] += e;
                    counts[j] += 1;
                }
                None => missing += 1,
            }
        }
    }
    let per_joint: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect();
    let mean = per_joint.iter().sum::<f64>() / NUM_MAIN_JOINTS as f64;
    Ok(JointErrorSummary {
        per_joint,
        mean,
        missing,
    })
}

pub fn evaluate_pose(
    forest: &Forest<f64>,
    images: &[SyntheticImage],
    camera: &Camera,
    query_pixels: usize,
    seed: u64,
) -> Result<JointErrorSummary> {
    summarize(&estimate_all(forest, images, camera, query_pixels, seed)?, images)
}

/// Mean error (mm) of the twelve limb joints after completing each
/// estimated skeleton with [`ik_fuse`] from its true paws, each moved by a
/// uniform jitter of up to `paw_jitter` mm per axis to stand in for a paw
/// detector. Images with a missing main joint are skipped; the count of
/// used images is returned with the errors.
pub fn limb_errors(
    model: &SkeletonModel,
    estimates: &[JointEstimate],
    images: &[SyntheticImage],
    paw_jitter: f64,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let chains = LimbChains::at_scale(model, 1.0);
    let mut sums = vec![0.0; NUM_JOINTS - NUM_MAIN_JOINTS];
    let mut used = 0;
    for (i, (est, img)) in estimates.iter().zip(images).enumerate() {
        let Some(main) = est
            .joints
            .iter()
            .map(|g| g.map(|g| Point3::from(g.position)))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let mut rng = stream(seed, "paw-jitter", &[i as u64]);
        let mut paws = [None; 4];
        for (p, limb) in paws.iter_mut().zip(&LIMBS) {
            let mut q = img.joints[limb.paw];
            if paw_jitter > 0.0 {
                for c in q.coords.iter_mut() {
                    *c += rng.random_range(-paw_jitter..=paw_jitter);
                }
            }
            *p = Some(q);
        }
        let fused = ik_fuse(&main, &paws, &chains)?;
        for (k, s) in sums.iter_mut().enumerate() {
            let j = NUM_MAIN_JOINTS + k;
            *s += (fused.joints[j] - img.joints[j]).norm();
        }
        used += 1;
    }
    let per_joint = sums
        .iter()
        .map(|s| if used == 0 { f64::NAN } else { s / used as f64 })
        .collect();
    Ok((per_joint, used))
}

/// Worst deviations seen when re-solving the limbs of FK skeletons from
/// their true paws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IkRoundTrip {
    pub poses: usize,
    /// Largest |solved bone length - model bone length| (mm) over all limb
    /// bones.
    pub max_length_error: f64,
    /// Largest |knee-ankle-paw angle - 90 degrees| (rad).
    pub max_angle_error: f64,
    /// Poses whose main-body joints changed at all.
    pub main_moved: usize,
    /// Limbs whose paw was out of reach.
    pub clamped: usize,
    /// Mean distance (mm) of re-solved limb joints from the FK ones.
    pub mean_joint_error: f64,
}

/// Run FK on each pose, drop the limb joints and re-solve them from the
/// true paws with the pose's own bone lengths.
pub fn ik_round_trip(model: &SkeletonModel, poses: &[SkeletonPose]) -> Result<IkRoundTrip> {
    let per_pose = poses
        .par_iter()
        .map(|pose| -> Result<(f64, f64, bool, usize, f64)> {
            let posed = forward_kinematics(model, pose)?;
            let chains = LimbChains::for_pose(model, pose);
            let paws = LIMBS.map(|l| Some(posed.positions[l.paw]));
            let fused = ik_fuse(posed.main_joints(), &paws, &chains)?;
            let j = &fused.joints;
            let mut len_err: f64 = 0.0;
            let mut ang_err: f64 = 0.0;
            for (k, l) in LIMBS.iter().enumerate() {
                let bones = [(l.anchor, l.upper), (l.upper, l.middle), (l.middle, l.paw)];
                for ((a, b), want) in bones.iter().zip(chains.lengths[k]) {
                    len_err = len_err.max(((j[*b] - j[*a]).norm() - want).abs());
                }
                if k >= 2 {
                    let angle = (j[l.upper] - j[l.middle]).angle(&(j[l.paw] - j[l.middle]));
                    ang_err = ang_err.max((angle - std::f64::consts::FRAC_PI_2).abs());
                }
            }
            let moved = j[..NUM_MAIN_JOINTS] != posed.positions[..NUM_MAIN_JOINTS];
            let clamped = fused.status.iter().filter(|s| **s == LimbStatus::Clamped).count();
            let dist: f64 = (NUM_MAIN_JOINTS..NUM_JOINTS)
                .map(|i| (j[i] - posed.positions[i]).norm())
                .sum::<f64>()
                / (NUM_JOINTS - NUM_MAIN_JOINTS) as f64;
            Ok((len_err, ang_err, moved, clamped, dist))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = IkRoundTrip {
        poses: poses.len(),
        max_length_error: 0.0,
        max_angle_error: 0.0,
        main_moved: 0,
        clamped: 0,
        mean_joint_error: 0.0,
    };
    for (l, a, moved, c, d) in per_pose {
        out.max_length_error = out.max_length_error.max(l);
        out.max_angle_error = out.max_angle_error.max(a);
        out.main_moved += usize::from(moved);
        out.clamped += c;
        out.mean_joint_error += d;
    }
    if !poses.is_empty() {
        out.mean_joint_error /= poses.len() as f64;
    }
    Ok(out)
}

/// Mean joint error of one forest at one test noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoiseRow {
    pub sigma: f64,
    pub baseline: JointErrorSummary,
    pub disc: JointErrorSummary,
}

#[derive(Debug, Clone)]
pub struct PoseExperimentResult {
    pub baseline: Forest<f64>,
    pub disc: Forest<f64>,
    pub log: RetrainLog,
    pub noise: Vec<NoiseRow>,
    /// Noise-free mean joint error of the first k trees of each forest, for
    /// k = 1 ..= number of trees: (k, baseline, disc).
    pub forest_size: Vec<(usize, f64, f64)>,
    /// Mean limb-joint errors (joints 12..24) of the retrained forest's
    /// noise-free estimates completed by IK, and the number of images used.
    pub limbs: (Vec<f64>, usize),
}

impl PoseExperimentResult {
    /// The noise-free row, if the sweep contains sigma = 0.
    pub fn clean(&self) -> Option<&NoiseRow> {
        self.noise.iter().find(|r| r.sigma == 0.0)
    }
}

/// Regression training set drawn from `images`.
pub fn regression_set<'a>(images: &'a [SyntheticImage], camera: &Camera, per_image: usize, seed: u64) -> PixelSet<'a> {
    PixelSet::regression(images, *camera, per_image, seed)
}

/// Train a baseline on the training images, retrain it on the retraining
/// images, and evaluate both on the test images at every noise level.
pub fn run_pose_experiment(model: &SkeletonModel, config: &PoseExperimentConfig) -> Result<PoseExperimentResult> {
    config.ranges.validate()?;
    let sets = render_sets(model, &config.camera, &config.ranges, &config.images, 0.0, config.seed)?;
    run_pose_experiment_on(model, config, &sets)
}

/// Baseline regression forest trained on `images`.
pub fn train_pose_forest(config: &PoseExperimentConfig, images: &[SyntheticImage]) -> Result<Forest<f64>> {
    let objective = RegressionObjective::from_params(&config.train);
    let seed = derive_seed(config.seed, "train-pixels", &[]);
    let train = regression_set(images, &config.camera, config.pixels_per_image, seed);
    Ok(train_forest(&objective, &train, &config.train)?)
}

/// Retrain `baseline` on `images`.
pub fn retrain_pose_forest(
    config: &PoseExperimentConfig,
    baseline: &Forest<f64>,
    images: &[SyntheticImage],
) -> Result<(Forest<f64>, RetrainLog)> {
    let objective = RegressionObjective::from_params(&config.train);
    let seed = derive_seed(config.seed, "disc-pixels", &[]);
    let disc = regression_set(images, &config.camera, config.pixels_per_image, seed);
    Ok(disc_train_forest(baseline, &objective, &disc, &config.disc)?)
}

/// Test images with noise level `k` of the sweep applied.
pub fn noisy_test_set(
    model: &SkeletonModel,
    config: &PoseExperimentConfig,
    test: &[SyntheticImage],
    k: usize,
    sigma: f64,
) -> Result<Vec<SyntheticImage>> {
    with_noise(model, test, &config.camera, sigma, derive_seed(config.seed, "test-noise", &[k as u64]))
}

/// Seed of the query pixels used when evaluating pose forests.
pub fn query_seed(config: &PoseExperimentConfig) -> u64 {
    derive_seed(config.seed, "test-queries", &[])
}

/// [`run_pose_experiment`] on already rendered images.
pub fn run_pose_experiment_on(
    model: &SkeletonModel,
    config: &PoseExperimentConfig,
    sets: &ImageSets,
) -> Result<PoseExperimentResult> {
    let pixel_seed = |tag: &str| derive_seed(config.seed, tag, &[]);
    let baseline = train_pose_forest(config, &sets.train)?;
    let (disc, log) = retrain_pose_forest(config, &baseline, &sets.disc)?;

    let query_seed = query_seed(config);
    let clean = |f: &Forest<f64>| estimate_all(f, &sets.test, &config.camera, config.query_pixels, query_seed);
    let forest_size = (1..=baseline.len())
        .map(|k| {
            let b = summarize(&clean(&baseline.truncated(k))?, &sets.test)?.mean;
            let d = summarize(&clean(&disc.truncated(k))?, &sets.test)?.mean;
            Ok((k, b, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let limbs = limb_errors(model, &clean(&disc)?, &sets.test, config.paw_jitter, pixel_seed("paws"))?;

    let mut noise = Vec::with_capacity(config.noise_levels.len());
    for (k, &sigma) in config.noise_levels.iter().enumerate() {
        let noisy;
        let test: &[SyntheticImage] = if sigma == 0.0 {
            &sets.test
        } else {
            noisy = noisy_test_set(model, config, &sets.test, k, sigma)?;
            &noisy
        };
        noise.push(NoiseRow {
            sigma,
            baseline: evaluate_pose(&baseline, test, &config.camera, config.query_pixels, query_seed)?,
            disc: evaluate_pose(&disc, test, &config.camera, config.query_pixels, query_seed)?,
        });
    }
    Ok(PoseExperimentResult {
        baseline,
        disc,
        log,
        noise,
        forest_size,
        limbs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelExperimentConfig {
    pub camera: Camera,
    pub ranges: PerturbationRanges,
    pub images: ImageCounts,
    pub pixels_per_image: usize,
    /// Depth noise (mm) applied to every image set.
    pub noise_sigma: f64,
    pub train: TrainParams<f64>,
    pub disc: DiscParams,
    pub seed: u64,
}

impl LabelExperimentConfig {
    pub fn desk(seed: u64) -> Self {
        LabelExperimentConfig {
            camera: Camera::desk(),
            ranges: PerturbationRanges::default(),
            images: ImageCounts {
                train: 2000,
                disc: 2000,
                test: 200,
            },
            pixels_per_image: 100,
            noise_sigma: 16.0,
            train: label_train_params(derive_seed(seed, "label-train", &[])),
            disc: DiscParams::new(200, 60, derive_seed(seed, "label-disc", &[])),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabelExperimentResult {
    pub baseline: Forest<f64>,
    pub disc: Forest<f64>,
    pub log: RetrainLog,
    pub baseline_confusion: ConfusionMatrix,
    pub disc_confusion: ConfusionMatrix,
}

/// Confusion of `forest` over every foreground pixel of `images`.
pub fn evaluate_labels(forest: &Forest<f64>, images: &[SyntheticImage], camera: &Camera) -> Result<ConfusionMatrix> {
    let parts = images
        .par_iter()
        .map(|img| {
            let pred = part_label_image(forest, &img.depth, camera)?;
            let mut m = ConfusionMatrix::new();
            m.add(&pred, &img.labels)?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = ConfusionMatrix::new();
    for m in &parts {
        total.merge(m);
    }
    Ok(total)
}

pub fn run_label_experiment(model: &SkeletonModel, config: &LabelExperimentConfig) -> Result<LabelExperimentResult> {
    config.ranges.validate()?;
    let sets = render_sets(model, &config.camera, &config.ranges, &config.images, config.noise_sigma, config.seed)?;
    run_label_experiment_on(config, &sets)
}

pub fn train_label_forest(config: &LabelExperimentConfig, images: &[SyntheticImage]) -> Result<Forest<f64>> {
    let seed = derive_seed(config.seed, "train-pixels", &[]);
    let train = PixelSet::labeling(images, config.camera, config.pixels_per_image, seed);
    Ok(train_forest(&LABEL_OBJECTIVE, &train, &config.train)?)
}

pub fn retrain_label_forest(
    config: &LabelExperimentConfig,
    baseline: &Forest<f64>,
    images: &[SyntheticImage],
) -> Result<(Forest<f64>, RetrainLog)> {
    let seed = derive_seed(config.seed, "disc-pixels", &[]);
    let disc = PixelSet::labeling(images, config.camera, config.pixels_per_image, seed);
    Ok(disc_train_forest(baseline, &LABEL_OBJECTIVE, &disc, &config.disc)?)
}

pub fn run_label_experiment_on(config: &LabelExperimentConfig, sets: &ImageSets) -> Result<LabelExperimentResult> {
    let baseline = train_label_forest(config, &sets.train)?;
    let (disc, log) = retrain_label_forest(config, &baseline, &sets.disc)?;
    Ok(LabelExperimentResult {
        baseline_confusion: evaluate_labels(&baseline, &sets.test, &config.camera)?,
        disc_confusion: evaluate_labels(&disc, &sets.test, &config.camera)?,
        baseline,
        disc,
        log,
    })
}
