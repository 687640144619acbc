//! Two-class Gaussian-mixture benchmark in the unit square, with the
//! axis-threshold forest experiments run on it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassTargets, Dataset};
use crate::disc::{disc_train_forest, disc_train_iterations, DiscParams, NodeScoring, RetrainLog};
use crate::error::{Error, Result};
use crate::feature::{Axis, Feature};
use crate::forest::Forest;
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::train::{train_forest, ClassObjective, TrainParams};

/// Root seed of the benchmark instance used by the tests and the CLI
/// defaults.
pub const CANONICAL_SEED: u64 = 0x00C0_FFEE_2016;

pub const NUM_PAIRS: usize = 9;
pub const MAX_SIGMA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: [f64; 2],
    pub sigma: f64,
    pub class: usize,
}

/// Eighteen isotropic components, nine per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub seed: u64,
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.len() != 2 * NUM_PAIRS {
            return Err(Error::InvalidParam(format!(
                "mixture needs {} components, has {}",
                2 * NUM_PAIRS,
                self.components.len()
            )));
        }
        for class in 0..2 {
            let n = self.components.iter().filter(|c| c.class == class).count();
            if n != NUM_PAIRS {
                return Err(Error::InvalidParam(format!("class {class} has {n} components")));
            }
        }
        for c in &self.components {
            let inside = |v: f64| v > 0.0 && v < 1.0;
            if !inside(c.mean[0]) || !inside(c.mean[1]) || !(c.sigma > 0.0 && c.sigma < MAX_SIGMA) {
                return Err(Error::InvalidParam(format!("component out of bounds: {c:?}")));
            }
        }
        Ok(())
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            return v;
        }
    }
}

/// Means uniform in (0,1)^2 and sigmas uniform in (0, 0.2); component `2k`
/// is class 0 and `2k + 1` class 1.
pub fn gen_mixture_spec(seed: u64) -> GaussianMixtureSpec {
    let mut rng = stream(seed, "gauss-spec", &[]);
    let components = (0..2 * NUM_PAIRS)
        .map(|k| GaussianComponent {
            mean: [open_unit(&mut rng), open_unit(&mut rng)],
            sigma: MAX_SIGMA * open_unit(&mut rng),
            class: k % 2,
        })
        .collect();
    GaussianMixtureSpec { seed, components }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint2D<T> {
    pub x: T,
    pub y: T,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet<T> {
    pub points: Vec<LabeledPoint2D<T>>,
}

impl<T: Scalar> PointSet<T> {
    pub fn union(&self, other: &PointSet<T>) -> PointSet<T> {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        PointSet { points }
    }

    pub fn class_ratio(&self) -> f64 {
        let ones = self.points.iter().filter(|p| p.class == 1).count();
        ones as f64 / self.points.len().max(1) as f64
    }
}

impl<T: Scalar> Dataset<T> for PointSet<T> {
    fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn feature_value(&self, index: usize, feature: &Feature<T>) -> T {
        let p = &self.points[index];
        match feature {
            Feature::Axis2D(Axis::X) => p.x,
            Feature::Axis2D(Axis::Y) => p.y,
            Feature::DepthOffset { .. } => panic!("2D points have no depth features"),
        }
    }
}

impl<T: Scalar> ClassTargets for PointSet<T> {
    fn num_classes(&self) -> usize {
        2
    }

    #[inline]
    fn label(&self, index: usize) -> usize {
        self.points[index].class
    }
}

const SAMPLE_CHUNK: usize = 1 << 14;

/// `n` points: component uniform over the 18, then an isotropic normal draw.
/// Points in the Gaussian tails outside the unit square are kept.
pub fn sample_dataset<T: Scalar>(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> PointSet<T> {
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let points = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, "gauss-sample", &[c as u64]);
            let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            (0..len)
                .map(|_| {
                    let comp = &spec.components[rng.random_range(0..spec.components.len())];
                    let dx: f64 = StandardNormal.sample(&mut rng);
                    let dy: f64 = StandardNormal.sample(&mut rng);
                    LabeledPoint2D {
                        x: T::lit(comp.mean[0] + comp.sigma * dx),
                        y: T::lit(comp.mean[1] + comp.sigma * dy),
                        class: comp.class,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    PointSet { points }
}

/// Benchmark instance: mixture plus its three datasets.
#[derive(Debug, Clone)]
pub struct GaussBench<T> {
    pub spec: GaussianMixtureSpec,
    pub seed: u64,
    pub train: PointSet<T>,
    pub disc: PointSet<T>,
    pub eval: PointSet<T>,
}

/// Per-dataset size at desk scale.
pub const DESK_SIZE: usize = 100_000;
/// Per-dataset size at full scale.
pub const FULL_SIZE: usize = 1_000_000;

impl<T: Scalar> GaussBench<T> {
    pub fn new(seed: u64, n: usize) -> Self {
        let spec = gen_mixture_spec(seed);
        Self::from_spec(spec, seed, n)
    }

    pub fn from_spec(spec: GaussianMixtureSpec, seed: u64, n: usize) -> Self {
        let d = |tag: &str| crate::rng::derive_seed(seed, tag, &[]);
        GaussBench {
            train: sample_dataset(&spec, n, d("train")),
            disc: sample_dataset(&spec, n, d("disc")),
            eval: sample_dataset(&spec, n, d("eval")),
            spec,
            seed,
        }
    }

    /// Fresh retraining set for round `iteration` of iterated retraining.
    pub fn disc_round(&self, iteration: usize) -> PointSet<T> {
        if iteration <= 1 {
            return self.disc.clone();
        }
        let seed = crate::rng::derive_seed(self.seed, "disc-round", &[iteration as u64]);
        sample_dataset(&self.spec, self.disc.len(), seed)
    }
}

pub const OBJECTIVE: ClassObjective = ClassObjective { num_classes: 2 };

pub fn train_baseline<T: Scalar>(data: &PointSet<T>, params: &TrainParams<T>) -> Result<Forest<T>> {
    train_forest(&OBJECTIVE, data, params)
}

pub fn retrain<T: Scalar>(
    forest: &Forest<T>,
    data: &PointSet<T>,
    params: &DiscParams,
) -> Result<(Forest<T>, RetrainLog)> {
    disc_train_forest(forest, &OBJECTIVE, data, params)
}

pub fn accuracy<T: Scalar>(forest: &Forest<T>, data: &PointSet<T>) -> Result<f64> {
    forest.accuracy(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    ForestSize,
    Candidates,
    LeafSize,
    StartLevel,
    Iterations,
}

impl AblationKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "forest-size" | "forestSize" => AblationKind::ForestSize,
            "m" | "candidates" => AblationKind::Candidates,
            "leaf-size" | "leafSize" => AblationKind::LeafSize,
            "start-level" | "startLevel" => AblationKind::StartLevel,
            "iterations" => AblationKind::Iterations,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::ForestSize => "forest-size",
            AblationKind::Candidates => "m",
            AblationKind::LeafSize => "leaf-size",
            AblationKind::StartLevel => "start-level",
            AblationKind::Iterations => "iterations",
        }
    }

    /// Sweep used when none is given.
    pub fn default_grid(self) -> Vec<usize> {
        match self {
            AblationKind::ForestSize => (1..=19).step_by(2).collect(),
            AblationKind::Candidates => vec![10, 20, 40, 80, 160, 320, 640],
            AblationKind::LeafSize => vec![15, 30, 60, 125, 250, 500, 1000, 2500, 5000, 10000],
            AblationKind::StartLevel => vec![0, 2, 4, 6, 8, 10, 12],
            AblationKind::Iterations => vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationRow {
    pub value: usize,
    pub baseline_acc: f64,
    pub disc_acc: f64,
}

/// Sweep one parameter. The baseline is trained once on the training set
/// (once per size for the forest-size sweep, via truncation) and every grid
/// point is retrained and evaluated on the same datasets.
pub fn run_ablation<T: Scalar>(
    bench: &GaussBench<T>,
    kind: AblationKind,
    grid: &[usize],
    base: &TrainParams<T>,
    disc: &DiscParams,
) -> Result<Vec<AblationRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("empty ablation grid".into()));
    }
    let row = |value, b, d| AblationRow {
        value,
        baseline_acc: b,
        disc_acc: d,
    };
    match kind {
        AblationKind::ForestSize => {
            if grid.contains(&0) {
                return Err(Error::InvalidParam("forest size must be positive".into()));
            }
            let largest = *grid.iter().max().expect("non-empty");
            let params = TrainParams {
                num_trees: largest,
                ..base.clone()
            };
            let baseline = train_baseline(&bench.train, &params)?;
            let (retrained, _) = retrain(&baseline, &bench.disc, disc)?;
            grid.iter()
                .map(|&k| {
                    Ok(row(
                        k,
                        accuracy(&baseline.truncated(k), &bench.eval)?,
                        accuracy(&retrained.truncated(k), &bench.eval)?,
                    ))
                })
                .collect()
        }
        AblationKind::Iterations => {
            let baseline = train_baseline(&bench.train, base)?;
            let base_acc = accuracy(&baseline, &bench.eval)?;
            let rounds = DiscParams {
                iterations: *grid.iter().max().expect("non-empty"),
                ..disc.clone()
            };
            let (_, trace, _) = disc_train_iterations(
                &baseline,
                &OBJECTIVE,
                |it| bench.disc_round(it),
                &rounds,
                |f| accuracy(f, &bench.eval).unwrap_or(f64::NAN),
            )?;
            Ok(grid.iter().map(|&it| row(it, base_acc, trace[it].score)).collect())
        }
        _ => {
            let baseline = train_baseline(&bench.train, base)?;
            let base_acc = accuracy(&baseline, &bench.eval)?;
            grid.iter()
                .map(|&v| {
                    let mut p = disc.clone();
                    match kind {
                        AblationKind::Candidates => p.candidates = v,
                        AblationKind::LeafSize => p.leaf_capacity = v,
                        AblationKind::StartLevel => p.start_level = v,
                        _ => unreachable!(),
                    }
                    let (f, _) = retrain(&baseline, &bench.disc, &p)?;
                    Ok(row(v, base_acc, accuracy(&f, &bench.eval)?))
                })
                .collect()
        }
    }
}

/// Accuracies of the baseline, of a baseline given twice the data (and
/// twice `l_n`), of retraining that scores nodes by local gain, and of full
/// retraining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlResult {
    pub baseline: f64,
    pub union_baseline: f64,
    pub local_gain: f64,
    pub full: f64,
}

pub fn run_controls<T: Scalar>(
    bench: &GaussBench<T>,
    base: &TrainParams<T>,
    disc: &DiscParams,
) -> Result<ControlResult> {
    let baseline = train_baseline(&bench.train, base)?;
    let union_params = TrainParams {
        leaf_capacity: base.leaf_capacity * 2,
        ..base.clone()
    };
    let union = train_baseline(&bench.train.union(&bench.disc), &union_params)?;
    let local = DiscParams {
        scoring: NodeScoring::LocalGain,
        ..disc.clone()
    };
    let (local_forest, _) = retrain(&baseline, &bench.disc, &local)?;
    let (full_forest, _) = retrain(&baseline, &bench.disc, disc)?;
    Ok(ControlResult {
        baseline: accuracy(&baseline, &bench.eval)?,
        union_baseline: accuracy(&union, &bench.eval)?,
        local_gain: accuracy(&local_forest, &bench.eval)?,
        full: accuracy(&full_forest, &bench.eval)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_is_deterministic_and_balanced() {
        let a = gen_mixture_spec(11);
        assert_eq!(a, gen_mixture_spec(11));
        assert_ne!(a, gen_mixture_spec(12));
        a.validate().unwrap();
        assert_eq!(a.components.iter().filter(|c| c.class == 0).count(), 9);
    }

    #[test]
    fn single_point_sample() {
        let spec = gen_mixture_spec(3);
        let s: PointSet<f64> = sample_dataset(&spec, 1, 5);
        assert_eq!(s.points.len(), 1);
        assert!(s.points[0].class < 2);
    }

    #[test]
    fn ablation_names_round_trip() {
        for k in [
            AblationKind::ForestSize,
            AblationKind::Candidates,
            AblationKind::LeafSize,
            AblationKind::StartLevel,
            AblationKind::Iterations,
        ] {
            assert_eq!(AblationKind::parse(k.name()), Some(k));
        }
        assert_eq!(AblationKind::parse("nope"), None);
    }
}
