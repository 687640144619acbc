//! Experiment configuration files (TOML) and their resolution into the
//! parameter structs of the library crates.

use std::path::{Path, PathBuf};

use discforest::gauss::{AblationKind, CANONICAL_SEED, DESK_SIZE, FULL_SIZE};
use discforest::rng::derive_seed;
use discforest::{DiscParams, NodeScoring, TrainParams};
use discforest_mouse::pipeline::{ImageCounts, LabelExperimentConfig, PoseExperimentConfig};
use discforest_mouse::Camera;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Gauss,
    Pose,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

/// Optional overrides of baseline training parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub num_trees: Option<usize>,
    pub candidates: Option<usize>,
    pub leaf_capacity: Option<usize>,
    pub max_levels: Option<usize>,
    pub thresholds_per_feature: Option<usize>,
    pub eigen_bound: Option<f64>,
    pub max_offset: Option<f64>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSection {
    pub candidates: Option<usize>,
    pub leaf_capacity: Option<usize>,
    pub subset_fraction: Option<f64>,
    pub iterations: Option<usize>,
    pub start_level: Option<usize>,
    pub keep_incumbent: Option<bool>,
    pub scoring: Option<NodeScoring>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussSection {
    /// Points per dataset; defaults to the scale's size.
    pub n: Option<usize>,
    /// Mixture spec file; generated from the seed when absent.
    pub spec: Option<PathBuf>,
    /// Ablations to sweep, by name (`forest-size`, `m`, `leaf-size`,
    /// `start-level`, `iterations`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ablations: Vec<String>,
    /// Grid overrides keyed by ablation name.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub grids: std::collections::BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub controls: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSection {
    /// Directory with `train/`, `disc/` and `test/` image sets written by
    /// `render`; images are synthesised when absent.
    pub dataset: Option<PathBuf>,
    pub train_images: Option<usize>,
    pub disc_images: Option<usize>,
    pub test_images: Option<usize>,
    pub pixels_per_image: Option<usize>,
    pub query_pixels: Option<usize>,
    pub noise_levels: Option<Vec<f64>>,
    pub noise_sigma: Option<f64>,
    pub paw_jitter: Option<f64>,
    /// Sweep of baseline `m` for the pose task.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_grid: Vec<usize>,
}

/// One experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub disc: DiscSection,
    #[serde(default)]
    pub gauss: GaussSection,
    #[serde(default)]
    pub pose: ImageSection,
    #[serde(default)]
    pub label: ImageSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_seed() -> u64 {
    CANONICAL_SEED
}

impl ExperimentConfig {
    pub fn new(task: Task, output: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            task,
            scale: Scale::Desk,
            seed: CANONICAL_SEED,
            output: output.into(),
            train: TrainSection::default(),
            disc: DiscSection::default(),
            gauss: GaussSection::default(),
            pose: ImageSection::default(),
            label: ImageSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The config as recorded next to a run's results: everything except
    /// `output`, so a rerun into another directory records the same bytes.
    pub fn to_recorded_toml(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("config serialises");
        table.remove("output");
        toml::to_string(&table).expect("config serialises")
    }

    /// SHA-256 of the recorded serialisation, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_recorded_toml().as_bytes()))
    }

    fn check_paths(&self) -> Result<()> {
        let paths = [&self.gauss.spec, &self.pose.dataset, &self.label.dataset];
        for p in paths.into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::data(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn apply_train(&self, mut p: TrainParams<f64>) -> TrainParams<f64> {
        let t = &self.train;
        if let Some(v) = t.num_trees {
            p.num_trees = v;
        }
        if let Some(v) = t.candidates {
            p.candidates = v;
        }
        if let Some(v) = t.leaf_capacity {
            p.leaf_capacity = v;
        }
        if let Some(v) = t.max_levels {
            p.max_levels = v;
        }
        if let Some(v) = t.thresholds_per_feature {
            p.thresholds_per_feature = v;
        }
        if let Some(v) = t.eigen_bound {
            p.eigen_bound = v;
        }
        if let (Some(v), discforest::FeatureFamily::DepthOffset { max_offset }) = (t.max_offset, &mut p.family) {
            *max_offset = v;
        }
        if let Some(v) = t.bootstrap {
            p.bootstrap = v;
        }
        p
    }

    pub fn apply_disc(&self, mut p: DiscParams) -> DiscParams {
        let d = &self.disc;
        if let Some(v) = d.candidates {
            p.candidates = v;
        }
        if let Some(v) = d.leaf_capacity {
            p.leaf_capacity = v;
        }
        if let Some(v) = d.subset_fraction {
            p.subset_fraction = v;
        }
        if let Some(v) = d.iterations {
            p.iterations = v;
        }
        if let Some(v) = d.start_level {
            p.start_level = v;
        }
        if let Some(v) = d.keep_incumbent {
            p.keep_incumbent = v;
        }
        if let Some(v) = d.scoring {
            p.scoring = v;
        }
        p
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.check_paths()?;
        let resolved = match self.task {
            Task::Gauss => Resolved::Gauss(self.resolve_gauss()?),
            Task::Pose => Resolved::Pose(self.resolve_pose()),
            Task::Label => Resolved::Label(self.resolve_label()),
        };
        match &resolved {
            Resolved::Gauss(g) => {
                g.train.validate()?;
                g.disc.validate()?;
            }
            Resolved::Pose(p) => {
                p.config.train.validate()?;
                p.config.disc.validate()?;
                p.config.ranges.validate()?;
            }
            Resolved::Label(l) => {
                l.config.train.validate()?;
                l.config.disc.validate()?;
                l.config.ranges.validate()?;
            }
        }
        Ok(resolved)
    }

    fn resolve_gauss(&self) -> Result<GaussRun> {
        let n = self.gauss.n.unwrap_or(match self.scale {
            Scale::Desk => DESK_SIZE,
            Scale::Full => FULL_SIZE,
        });
        if n == 0 {
            return Err(CliError::usage("gauss.n must be positive"));
        }
        let mut ablations = Vec::new();
        for name in &self.gauss.ablations {
            let kind = AblationKind::parse(name).ok_or_else(|| CliError::usage(format!("unknown ablation {name:?}")))?;
            let grid = match self.gauss.grids.get(kind.name()) {
                Some(g) => g.clone(),
                None => kind.default_grid(),
            };
            ablations.push((kind, grid));
        }
        for key in self.gauss.grids.keys() {
            if AblationKind::parse(key).is_none() {
                return Err(CliError::usage(format!("grid for unknown ablation {key:?}")));
            }
        }
        Ok(GaussRun {
            seed: self.seed,
            n,
            spec: self.gauss.spec.clone(),
            train: self.apply_train(TrainParams::axis_classification(derive_seed(self.seed, "gauss-train", &[]))),
            disc: self.apply_disc(DiscParams::new(50, 60, derive_seed(self.seed, "gauss-disc", &[]))),
            ablations,
            controls: self.gauss.controls,
        })
    }

    fn images(&self, s: &ImageSection, base: &ImageCounts) -> ImageCounts {
        ImageCounts {
            train: s.train_images.unwrap_or(base.train),
            disc: s.disc_images.unwrap_or(base.disc),
            test: s.test_images.unwrap_or(base.test),
        }
    }

    fn resolve_pose(&self) -> PoseRun {
        let mut c = match self.scale {
            Scale::Desk => PoseExperimentConfig::desk(self.seed),
            Scale::Full => PoseExperimentConfig::full(self.seed),
        };
        let s = &self.pose;
        c.images = self.images(s, &c.images);
        c.pixels_per_image = s.pixels_per_image.unwrap_or(c.pixels_per_image);
        c.query_pixels = s.query_pixels.unwrap_or(c.query_pixels);
        if let Some(v) = &s.noise_levels {
            c.noise_levels = v.clone();
        }
        c.paw_jitter = s.paw_jitter.unwrap_or(c.paw_jitter);
        c.train = self.apply_train(c.train);
        c.disc = self.apply_disc(c.disc);
        PoseRun {
            config: c,
            dataset: s.dataset.clone(),
            m_grid: s.m_grid.clone(),
        }
    }

    fn resolve_label(&self) -> LabelRun {
        let mut c = LabelExperimentConfig::desk(self.seed);
        if self.scale == Scale::Full {
            c.camera = Camera::full();
            c.images = ImageCounts {
                train: 360,
                disc: 360,
                test: 100,
            };
            c.pixels_per_image = 1380;
        }
        let s = &self.label;
        c.images = self.images(s, &c.images);
        c.pixels_per_image = s.pixels_per_image.unwrap_or(c.pixels_per_image);
        c.noise_sigma = s.noise_sigma.unwrap_or(c.noise_sigma);
        c.train = self.apply_train(c.train);
        c.disc = self.apply_disc(c.disc);
        LabelRun {
            config: c,
            dataset: s.dataset.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussRun {
    pub seed: u64,
    pub n: usize,
    pub spec: Option<PathBuf>,
    pub train: TrainParams<f64>,
    pub disc: DiscParams,
    pub ablations: Vec<(AblationKind, Vec<usize>)>,
    pub controls: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRun {
    pub config: PoseExperimentConfig,
    pub dataset: Option<PathBuf>,
    pub m_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRun {
    pub config: LabelExperimentConfig,
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Gauss(GaussRun),
    Pose(PoseRun),
    Label(LabelRun),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_gauss_uses_a_million_points() {
        let mut c = ExperimentConfig::new(Task::Gauss, "out");
        c.scale = Scale::Full;
        let Resolved::Gauss(g) = c.resolve().unwrap() else { panic!() };
        assert_eq!(g.n, 1_000_000);
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let text = r#"
            task = "pose"
            seed = 9
            output = "out/pose"
            [train]
            num_trees = 3
            [pose]
            train_images = 10
            noise_levels = [0.0, 5.0]
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        let Resolved::Pose(p) = c.resolve().unwrap() else { panic!() };
        assert_eq!(p.config.train.num_trees, 3);
        assert_eq!(p.config.images.train, 10);

        let mut moved = c.clone();
        moved.output = "elsewhere".into();
        assert_eq!(moved.to_recorded_toml(), c.to_recorded_toml());
        assert_eq!(moved.hash(), c.hash());
        let recorded = ExperimentConfig::from_toml(&c.to_recorded_toml()).unwrap();
        assert_eq!(recorded.output, PathBuf::from("results"));
        assert_eq!(recorded.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_and_ablations_are_usage_errors() {
        assert!(ExperimentConfig::from_toml("task = \"gauss\"\noutput = \"o\"\nbogus = 1").is_err());
        let mut c = ExperimentConfig::new(Task::Gauss, "o");
        c.gauss.ablations = vec!["nope".into()];
        assert_eq!(c.resolve().unwrap_err().exit_code(), crate::error::EXIT_USAGE);
    }
}
