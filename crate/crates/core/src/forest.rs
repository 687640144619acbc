use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassTargets, Dataset};
use crate::error::{Error, Result};
use crate::leaf::{argmax, LeafModel};
use crate::scalar::Scalar;
use crate::train::TrainParams;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classification,
    Regression,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classification => "classification",
            Mode::Regression => "regression",
        }
    }
}

/// An ensemble of trees sharing a mode and a feature family. Immutable once
/// built; safe to query from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest<T> {
    pub trees: Vec<Tree<T>>,
    pub mode: Mode,
    pub params: TrainParams<T>,
}

impl<T: Scalar> Forest<T> {
    pub fn new(trees: Vec<Tree<T>>, mode: Mode, params: TrainParams<T>) -> Self {
        Forest { trees, mode, params }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Forest made of the first `k` trees.
    pub fn truncated(&self, k: usize) -> Forest<T> {
        Forest {
            trees: self.trees[..k.min(self.trees.len())].to_vec(),
            mode: self.mode,
            params: TrainParams {
                num_trees: k,
                ..self.params.clone()
            },
        }
    }

    pub fn expect_mode(&self, mode: Mode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected: mode.name(),
                found: self.mode.name(),
            })
        }
    }

    /// Leaf reached in every tree, in tree order.
    pub fn leaves<D: Dataset<T> + ?Sized>(&self, data: &D, index: usize) -> Vec<&LeafModel<T>> {
        self.trees.iter().map(|t| t.leaf(t.route(data, index))).collect()
    }

    /// Majority vote of the trees' leaf labels; ties go to the lowest class.
    pub fn predict_class<D: Dataset<T> + ?Sized>(&self, data: &D, index: usize, num_classes: usize) -> usize {
        let mut votes = vec![0usize; num_classes];
        for t in &self.trees {
            if let Some(l) = t.leaf(t.route(data, index)).label() {
                votes[l] += 1;
            }
        }
        argmax(&votes)
    }

    /// Mean of the trees' leaf histograms.
    pub fn class_histogram<D: Dataset<T> + ?Sized>(&self, data: &D, index: usize, num_classes: usize) -> Vec<T> {
        let mut h = vec![T::zero(); num_classes];
        for t in &self.trees {
            if let Some(leaf) = t.leaf(t.route(data, index)).histogram() {
                for (acc, p) in h.iter_mut().zip(leaf) {
                    *acc = *acc + *p;
                }
            }
        }
        let n = T::from_count(self.trees.len().max(1));
        h.iter_mut().for_each(|p| *p = *p / n);
        h
    }

    /// Fraction of `data` whose majority vote matches its label.
    pub fn accuracy<D>(&self, data: &D) -> Result<f64>
    where
        D: Dataset<T> + ClassTargets + ?Sized,
    {
        self.expect_mode(Mode::Classification)?;
        if data.is_empty() {
            return Err(Error::Domain("accuracy over an empty set"));
        }
        let k = data.num_classes();
        let correct: usize = (0..data.len())
            .into_par_iter()
            .filter(|&i| self.predict_class(data, i, k) == data.label(i))
            .count();
        Ok(correct as f64 / data.len() as f64)
    }
}
