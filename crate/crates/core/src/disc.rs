//! Discriminative retraining: revisit an existing tree node by node against
//! a second dataset, installing at every split the candidate test under
//! which the whole subtree below it performs best, and shrinking or growing
//! the structure where the new data calls for it.

use std::fmt;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::feature::{grid_threshold, range_threshold, FeatureFamily, Side, SplitTest};
use crate::forest::Forest;
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;
use crate::train::{feature_values, grow_tree, Objective, TrainParams};
use crate::tree::{Node, NodeId, Tree};

/// How a split node compares its candidate tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeScoring {
    /// Route the node's examples through the subtree below and score the
    /// leaves' answers with the objective's metric.
    SubtreeMetric,
    /// Use the local split gain instead (ablation control).
    LocalGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscParams {
    /// Freshly sampled candidate tests per split node (`m`).
    pub candidates: usize,
    /// `l_n`: splits reached by at most this many examples are shrunk to a
    /// leaf; leaves reached by more are grown.
    pub leaf_capacity: usize,
    /// Fraction of the retraining set drawn (without replacement) per tree.
    pub subset_fraction: f64,
    pub iterations: usize,
    /// Nodes above this level are only routed through.
    pub start_level: usize,
    /// Let the current test compete with the sampled ones.
    pub keep_incumbent: bool,
    pub scoring: NodeScoring,
    pub seed: u64,
}

impl DiscParams {
    pub fn new(candidates: usize, leaf_capacity: usize, seed: u64) -> Self {
        DiscParams {
            candidates,
            leaf_capacity,
            subset_fraction: 0.5,
            iterations: 1,
            start_level: 0,
            keep_incumbent: true,
            scoring: NodeScoring::SubtreeMetric,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "subset_fraction must lie in (0, 1], got {}",
                self.subset_fraction
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParam("iterations must be at least 1".into()));
        }
        if self.leaf_capacity == 0 {
            return Err(Error::InvalidParam("leaf_capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainAction {
    Rescored,
    Shrunk,
    Grown,
    LeafRebuilt,
}

impl fmt::Display for RetrainAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RetrainAction::Rescored => "rescored",
            RetrainAction::Shrunk => "shrunk",
            RetrainAction::Grown => "grown",
            RetrainAction::LeafRebuilt => "leaf-rebuilt",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainLogEntry {
    /// Retraining round, starting at 1.
    pub iteration: usize,
    pub tree: usize,
    pub level: usize,
    pub size: usize,
    pub action: RetrainAction,
    /// Score of the test the node held before retraining (rescored only).
    pub incumbent_score: Option<f64>,
    /// Score of the installed test (rescored only).
    pub best_score: Option<f64>,
    /// Whether the incumbent took part in the comparison.
    pub incumbent_competed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrainLog {
    pub entries: Vec<RetrainLogEntry>,
}

impl RetrainLog {
    pub fn count(&self, action: RetrainAction) -> usize {
        self.entries.iter().filter(|e| e.action == action).count()
    }

    /// Rescored nodes where the incumbent competed yet the installed test
    /// scored lower.
    pub fn monotonicity_violations(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.incumbent_competed)
            .filter(|e| matches!((e.incumbent_score, e.best_score), (Some(i), Some(b)) if b < i))
            .count()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("log entry serialises"));
            out.push('\n');
        }
        out
    }

    pub fn extend(&mut self, other: RetrainLog) {
        self.entries.extend(other.entries);
    }
}

/// `metric(sum_i term(i))` for the examples in `indices` answered by `tree`.
pub fn eval_metric<T, D, O>(tree: &Tree<T>, objective: &O, data: &D, indices: &[usize]) -> T
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    let mut total = T::zero();
    for &i in indices {
        total = total + objective.example_term(data, i, tree.leaf(tree.route(data, i)));
    }
    objective.metric_from_total(total)
}

/// State shared by the recursive pass over one tree.
pub struct NodeContext<'a, T: Scalar, D: ?Sized, O: ?Sized> {
    pub objective: &'a O,
    pub data: &'a D,
    /// Parameters the tree was originally grown with; grow reuses them.
    pub train: &'a TrainParams<T>,
    pub params: &'a DiscParams,
    pub iteration: usize,
    pub tree_index: usize,
}

fn sample_disc_candidates<T, D>(
    family: &FeatureFamily<T>,
    level: usize,
    count: usize,
    data: &D,
    indices: &[usize],
    rng: &mut Stream,
) -> Vec<SplitTest<T>>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
{
    (0..count)
        .map(|_| {
            let feature = family.sample_feature(level, rng);
            let threshold = match family {
                FeatureFamily::Axis2D => grid_threshold(rng),
                FeatureFamily::DepthOffset { .. } => {
                    let values = feature_values(data, indices, &feature);
                    let lo = values.iter().copied().fold(T::infinity(), T::min);
                    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
                    range_threshold(lo, hi, rng)
                }
            };
            SplitTest::new(feature, threshold)
        })
        .collect()
}

fn partition<T: Scalar, D: Dataset<T> + ?Sized>(
    test: &SplitTest<T>,
    data: &D,
    indices: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let mut l = Vec::new();
    let mut r = Vec::new();
    for &i in indices {
        match test.side_of(data.feature_value(i, &test.feature)) {
            Side::Left => l.push(i),
            Side::Right => r.push(i),
        }
    }
    (l, r)
}

/// Retrain node `node` (at `level`) of `tree` on the examples `indices`
/// that reach it, then recurse depth-first into its children. The arena may
/// gain orphaned nodes; call [`Tree::compact`] afterwards.
pub fn disc_train_node<T, D, O>(
    tree: &mut Tree<T>,
    node: NodeId,
    level: usize,
    indices: &[usize],
    ctx: &NodeContext<'_, T, D, O>,
    rng: &mut Stream,
    log: &mut RetrainLog,
) where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    if indices.is_empty() {
        return;
    }
    let params = ctx.params;
    let capacity = params.leaf_capacity;
    let entry = |action, incumbent_score: Option<T>, best_score: Option<T>, competed| RetrainLogEntry {
        iteration: ctx.iteration,
        tree: ctx.tree_index,
        level,
        size: indices.len(),
        action,
        incumbent_score: incumbent_score.map(Scalar::as_f64),
        best_score: best_score.map(Scalar::as_f64),
        incumbent_competed: competed,
    };

    if level < params.start_level {
        if let Node::Split { test, left, right } = tree.node(node).clone() {
            let (l, r) = partition(&test, ctx.data, indices);
            disc_train_node(tree, left, level + 1, &l, ctx, rng, log);
            disc_train_node(tree, right, level + 1, &r, ctx, rng, log);
        }
        return;
    }

    match tree.node(node).clone() {
        Node::Split { .. } if indices.len() <= capacity => {
            tree.replace_with_leaf(node, ctx.objective.make_leaf(ctx.data, indices));
            log.entries.push(entry(RetrainAction::Shrunk, None, None, false));
        }
        Node::Split { test, left, right } => {
            let mut candidates = Vec::with_capacity(params.candidates + 1);
            if params.keep_incumbent {
                candidates.push(test);
            }
            candidates.extend(sample_disc_candidates(
                &ctx.train.family,
                level,
                params.candidates,
                ctx.data,
                indices,
                rng,
            ));
            if candidates.is_empty() {
                candidates.push(test);
            }
            let scores = score_candidates(tree, left, right, indices, &candidates, &test, ctx);
            let (incumbent_score, candidate_scores) = scores;
            let mut best = 0;
            for (k, s) in candidate_scores.iter().enumerate().skip(1) {
                if *s > candidate_scores[best] {
                    best = k;
                }
            }
            let installed = candidates[best];
            let best_score = candidate_scores[best];
            if params.keep_incumbent {
                debug_assert!(!(best_score < incumbent_score), "installed score below incumbent");
            }
            tree.set_test(node, installed);
            log.entries.push(entry(
                RetrainAction::Rescored,
                Some(incumbent_score),
                Some(best_score),
                params.keep_incumbent,
            ));
            let (l, r) = partition(&installed, ctx.data, indices);
            disc_train_node(tree, left, level + 1, &l, ctx, rng, log);
            disc_train_node(tree, right, level + 1, &r, ctx, rng, log);
        }
        Node::Leaf(_) if indices.len() > capacity => {
            let grow_params = TrainParams {
                leaf_capacity: capacity,
                ..ctx.train.clone()
            };
            let subtree = grow_tree(ctx.objective, ctx.data, indices, &grow_params, level, rng);
            tree.graft(node, subtree);
            log.entries.push(entry(RetrainAction::Grown, None, None, false));
        }
        Node::Leaf(_) => {
            tree.replace_with_leaf(node, ctx.objective.make_leaf(ctx.data, indices));
            log.entries.push(entry(RetrainAction::LeafRebuilt, None, None, false));
        }
    }
}

/// Score of the incumbent and of every candidate at a split whose children
/// are `left` and `right`.
fn score_candidates<T, D, O>(
    tree: &Tree<T>,
    left: NodeId,
    right: NodeId,
    indices: &[usize],
    candidates: &[SplitTest<T>],
    incumbent: &SplitTest<T>,
    ctx: &NodeContext<'_, T, D, O>,
) -> (T, Vec<T>)
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    let (data, objective) = (ctx.data, ctx.objective);
    match ctx.params.scoring {
        NodeScoring::SubtreeMetric => {
            // A candidate only changes which child an example enters; what
            // each child answers for it is fixed, so compute both once.
            let term_via = |child: NodeId| -> Vec<T> {
                indices
                    .iter()
                    .map(|&i| objective.example_term(data, i, tree.leaf(tree.route_from(child, data, i))))
                    .collect()
            };
            let via_left = term_via(left);
            let via_right = term_via(right);
            let score = |test: &SplitTest<T>| -> T {
                let mut total = T::zero();
                for (k, &i) in indices.iter().enumerate() {
                    total = total
                        + match test.side_of(data.feature_value(i, &test.feature)) {
                            Side::Left => via_left[k],
                            Side::Right => via_right[k],
                        };
                }
                objective.metric_from_total(total)
            };
            let scores: Vec<T> = candidates.par_iter().map(score).collect();
            (score(incumbent), scores)
        }
        NodeScoring::LocalGain => {
            let score = |test: &SplitTest<T>| -> T {
                let values = feature_values(data, indices, &test.feature);
                objective.split_gains(data, indices, &values, &[test.threshold])[0]
            };
            let scores: Vec<T> = candidates.par_iter().map(score).collect();
            (score(incumbent), scores)
        }
    }
}

/// Retrain every tree of `forest` on its own random subset of `data`.
/// Trees run in parallel; each tree's pass is depth-first from the root.
pub fn disc_train_forest<T, D, O>(
    forest: &Forest<T>,
    objective: &O,
    data: &D,
    params: &DiscParams,
) -> Result<(Forest<T>, RetrainLog)>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    disc_train_forest_iteration(forest, objective, data, params, 1)
}

fn disc_train_forest_iteration<T, D, O>(
    forest: &Forest<T>,
    objective: &O,
    data: &D,
    params: &DiscParams,
    iteration: usize,
) -> Result<(Forest<T>, RetrainLog)>
where
    T: Scalar,
    D: Dataset<T> + ?Sized,
    O: Objective<T, D> + ?Sized,
{
    params.validate()?;
    forest.expect_mode(objective.mode())?;
    let n = data.len();
    if n == 0 {
        return Ok((forest.clone(), RetrainLog::default()));
    }
    let subset_len = ((n as f64 * params.subset_fraction).round() as usize).clamp(1, n);
    let results: Vec<(Tree<T>, RetrainLog)> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let mut rng = stream(params.seed, "disc", &[iteration as u64, t as u64]);
            let mut subset = sample(&mut rng, n, subset_len).into_vec();
            subset.sort_unstable();
            let ctx = NodeContext {
                objective,
                data,
                train: &forest.params,
                params,
                iteration,
                tree_index: t,
            };
            let mut tree = tree.clone();
            let mut log = RetrainLog::default();
            let root = tree.root();
            disc_train_node(&mut tree, root, 0, &subset, &ctx, &mut rng, &mut log);
            tree.compact();
            (tree, log)
        })
        .collect();
    let mut log = RetrainLog::default();
    let mut trees = Vec::with_capacity(results.len());
    for (tree, l) in results {
        trees.push(tree);
        log.extend(l);
    }
    Ok((Forest::new(trees, forest.mode, forest.params.clone()), log))
}

/// Evaluation of the forest after each iteration; entry 0 is the input
/// forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub score: f64,
}

/// Run `params.iterations` rounds of retraining. Round `n` starts from the
/// output of round `n - 1` and retrains on `make_dataset(n)`.
pub fn disc_train_iterations<T, D, O, F, E>(
    forest: &Forest<T>,
    objective: &O,
    mut make_dataset: F,
    params: &DiscParams,
    mut evaluate: E,
) -> Result<(Forest<T>, Vec<IterationTrace>, RetrainLog)>
where
    T: Scalar,
    D: Dataset<T>,
    O: Objective<T, D> + ?Sized,
    F: FnMut(usize) -> D,
    E: FnMut(&Forest<T>) -> f64,
{
    params.validate()?;
    let mut trace = vec![IterationTrace {
        iteration: 0,
        score: evaluate(forest),
    }];
    let mut current = forest.clone();
    let mut log = RetrainLog::default();
    for it in 1..=params.iterations {
        let data = make_dataset(it);
        let (next, l) = disc_train_forest_iteration(&current, objective, &data, params, it)?;
        current = next;
        log.extend(l);
        trace.push(IterationTrace {
            iteration: it,
            score: evaluate(&current),
        });
    }
    Ok((current, trace, log))
}
