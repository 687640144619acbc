//! Binary decision forests for classification and per-joint offset
//! regression, together with discriminative node-at-a-time retraining of an
//! already trained forest against a second dataset.
//!
//! The numeric core is generic over the scalar type (`f32` or `f64`); the
//! aliases at the bottom of this file pin the common instantiations.

pub mod data;
pub mod disc;
pub mod error;
pub mod feature;
pub mod forest;
pub mod gauss;
pub mod impurity;
pub mod leaf;
pub mod persist;
pub mod rng;
pub mod scalar;
pub mod train;
pub mod tree;

pub use data::{ClassTargets, Dataset, OffsetTargets};
pub use disc::{
    disc_train_forest, disc_train_iterations, disc_train_node, eval_metric, DiscParams,
    IterationTrace, NodeScoring, RetrainAction, RetrainLog, RetrainLogEntry,
};
pub use error::{Error, Result};
pub use feature::{Axis, Feature, FeatureFamily, Side, SplitTest};
pub use forest::{Forest, Mode};
pub use impurity::{compactness, entropy, entropy_from_counts, gain};
pub use leaf::{make_leaf_classification, make_leaf_regression, JointLeaf, LeafModel};
pub use scalar::Scalar;
pub use train::{
    best_split, grow_tree, train_forest, ClassObjective, Objective, RegressionObjective,
    TrainParams,
};
pub use tree::{Node, NodeId, Tree};

pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type Tree64 = Tree<f64>;
pub type Tree32 = Tree<f32>;
pub type TrainParams64 = TrainParams<f64>;
pub type LeafModel64 = LeafModel<f64>;
pub type SplitTest64 = SplitTest<f64>;
