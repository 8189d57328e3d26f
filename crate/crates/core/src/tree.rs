//! CART decision trees, bootstrap forests, and the per-tree structural
//! summary that drives the network mapping.
//!
//! Splits minimize the weighted child impurity (summed per-output squared
//! error for regression, Gini for classification) over midpoints between
//! consecutive distinct feature values. Rows with `x[feature] <= threshold`
//! go left. Equal-impurity candidates resolve to the lowest feature index,
//! then the smallest threshold.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::rng::{rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    /// Mean target vector.
    Values(Vec<f64>),
    /// Majority class.
    Class(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Branch {
        level: usize,
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        level: usize,
        value: LeafValue,
    },
}

impl Node {
    pub fn level(&self) -> usize {
        match self {
            Node::Branch { level, .. } | Node::Leaf { level, .. } => *level,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    /// Convenience constructor for hand-built trees; levels are assigned by
    /// [`DecisionTree::from_root`].
    pub fn branch(feature: usize, threshold: f64, left: Node, right: Node) -> Node {
        Node::Branch {
            level: 0,
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn class_leaf(class: usize) -> Node {
        Node::Leaf {
            level: 0,
            value: LeafValue::Class(class),
        }
    }

    pub fn value_leaf(values: Vec<f64>) -> Node {
        Node::Leaf {
            level: 0,
            value: LeafValue::Values(values),
        }
    }

    fn relevel(&mut self, at: usize) {
        match self {
            Node::Branch { level, left, right, .. } => {
                *level = at;
                left.relevel(at + 1);
                right.relevel(at + 1);
            }
            Node::Leaf { level, .. } => *level = at,
        }
    }

    fn route<'a>(&'a self, row: &[f64]) -> &'a LeafValue {
        let mut node = self;
        loop {
            match node {
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
                Node::Leaf { value, .. } => return value,
            }
        }
    }

    /// Depth-first, left-first visit of every node.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Node::Branch { left, right, .. } = self {
            left.walk(f);
            right.walk(f);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    /// `ceil(sqrt(n_features))` candidates per split.
    Sqrt,
    Count(usize),
}

impl FeatureSubsample {
    /// Random-forest default: all features for regression, square root for
    /// classification.
    pub fn forest_default(task: Task) -> Self {
        match task {
            Task::Regression => FeatureSubsample::All,
            Task::Classification => FeatureSubsample::Sqrt,
        }
    }

    fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::All => n_features,
            FeatureSubsample::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            FeatureSubsample::Count(k) => k.clamp(1, n_features),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Deepest level that may hold a node; branches live on levels `< max_depth`.
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
}

impl TreeConfig {
    pub fn new(max_depth: usize) -> Self {
        TreeConfig {
            max_depth,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
    pub max_depth: usize,
    pub n_features: usize,
    pub task: Task,
}

impl DecisionTree {
    /// Wraps a hand-built node graph, assigning levels from the root.
    pub fn from_root(mut root: Node, n_features: usize, task: Task) -> Result<Self> {
        root.relevel(0);
        let mut deepest = 0;
        let mut bad_feature = None;
        root.walk(&mut |n| {
            deepest = deepest.max(n.level());
            if let Node::Branch { feature, .. } = n {
                if *feature >= n_features {
                    bad_feature = Some(*feature);
                }
            }
        });
        if let Some(f) = bad_feature {
            return Err(Error::InvalidParameter(format!(
                "branch feature {f} outside {n_features} features"
            )));
        }
        Ok(DecisionTree {
            root,
            max_depth: deepest.max(1),
            n_features,
            task,
        })
    }

    /// Leaf payload per row: mean target vector (regression) or the class
    /// index as a single column (classification).
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(features.ncols())?;
        let width = match self.task {
            Task::Classification => 1,
            Task::Regression => {
                let mut w = 1;
                self.root.walk(&mut |n| {
                    if let Node::Leaf {
                        value: LeafValue::Values(v),
                        ..
                    } = n
                    {
                        w = v.len();
                    }
                });
                w
            }
        };
        let mut out = Array2::zeros((features.nrows(), width));
        let mut row = vec![0.0; features.ncols()];
        for (i, x) in features.outer_iter().enumerate() {
            row.iter_mut().zip(x.iter()).for_each(|(r, v)| *r = *v);
            match self.root.route(&row) {
                LeafValue::Values(v) => out.row_mut(i).iter_mut().zip(v).for_each(|(o, v)| *o = *v),
                LeafValue::Class(c) => out[[i, 0]] = *c as f64,
            }
        }
        Ok(out)
    }

    pub fn predict_classes(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.predict(features)?.column(0).iter().map(|&v| v as usize).collect())
    }

    pub fn n_branches(&self) -> usize {
        let mut n = 0;
        self.root.walk(&mut |node| n += usize::from(!node.is_leaf()));
        n
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "tree input features",
                expected: self.n_features,
                found,
            });
        }
        Ok(())
    }
}

pub fn predict_tree(tree: &DecisionTree, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    tree.predict(features)
}

pub fn fit_tree(
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    task: Task,
    config: &TreeConfig,
    seed: u64,
) -> Result<DecisionTree> {
    let rows: Vec<usize> = (0..features.nrows()).collect();
    fit_on_rows(features, targets, task, config, rows, &mut rng(seed, Stream::Tree))
}

fn fit_on_rows(
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    task: Task,
    config: &TreeConfig,
    rows: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    if features.nrows() == 0 || features.ncols() == 0 || rows.is_empty() {
        return Err(Error::Empty("cannot fit a tree without rows and features"));
    }
    if targets.nrows() != features.nrows() {
        return Err(Error::DimensionMismatch {
            what: "target rows",
            expected: features.nrows(),
            found: targets.nrows(),
        });
    }
    if config.max_depth < 1 {
        return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
    }
    if config.min_leaf < 1 {
        return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
    }
    let n_classes = match task {
        Task::Regression => 0,
        Task::Classification => targets.column(0).iter().fold(0usize, |m, &v| m.max(v as usize + 1)),
    };
    let mut builder = Builder {
        x: features,
        y: targets,
        task,
        n_classes,
        config,
        rng,
        order: Vec::with_capacity(rows.len()),
    };
    let root = builder.grow(rows, 0);
    Ok(DecisionTree {
        root,
        max_depth: config.max_depth,
        n_features: features.ncols(),
        task,
    })
}

struct Builder<'a, 'r> {
    x: ArrayView2<'a, f64>,
    y: ArrayView2<'a, f64>,
    task: Task,
    n_classes: usize,
    config: &'a TreeConfig,
    rng: &'r mut ChaCha8Rng,
    order: Vec<usize>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_, '_> {
    fn grow(&mut self, rows: Vec<usize>, level: usize) -> Node {
        let can_split = level < self.config.max_depth && rows.len() >= 2 * self.config.min_leaf && !self.is_pure(&rows);
        if can_split {
            if let Some(split) = self.best_split(&rows) {
                let (left, right): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&r| self.x[[r, split.feature]] <= split.threshold);
                return Node::Branch {
                    level,
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(self.grow(left, level + 1)),
                    right: Box::new(self.grow(right, level + 1)),
                };
            }
        }
        Node::Leaf {
            level,
            value: self.leaf_value(&rows),
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y.row(rows[0]);
        rows.iter().all(|&r| self.y.row(r) == first)
    }

    fn leaf_value(&self, rows: &[usize]) -> LeafValue {
        match self.task {
            Task::Regression => {
                let n = rows.len() as f64;
                let mut mean = vec![0.0; self.y.ncols()];
                for &r in rows {
                    mean.iter_mut().zip(self.y.row(r)).for_each(|(m, v)| *m += v);
                }
                mean.iter_mut().for_each(|m| *m /= n);
                LeafValue::Values(mean)
            }
            Task::Classification => {
                let mut counts = vec![0usize; self.n_classes];
                for &r in rows {
                    counts[self.y[[r, 0]] as usize] += 1;
                }
                // max_by_key keeps the last maximum; scan in reverse so ties
                // resolve to the lowest class index.
                let class = (0..counts.len()).rev().max_by_key(|&c| counts[c]).unwrap_or(0);
                LeafValue::Class(class)
            }
        }
    }

    /// Candidate features for this node, ascending. Features constant on the
    /// node do not count toward the subsample size.
    fn candidate_features(&mut self, rows: &[usize]) -> Vec<usize> {
        let n_features = self.x.ncols();
        let k = self.config.feature_subsample.count(n_features);
        let varies = |f: usize| {
            let v0 = self.x[[rows[0], f]];
            rows.iter().any(|&r| self.x[[r, f]] != v0)
        };
        if k >= n_features {
            return (0..n_features).filter(|&f| varies(f)).collect();
        }
        let mut perm: Vec<usize> = (0..n_features).collect();
        perm.shuffle(self.rng);
        let mut chosen: Vec<usize> = perm.into_iter().filter(|&f| varies(f)).take(k).collect();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let candidates = self.candidate_features(rows);
        let mut best: Option<Split> = None;
        for f in candidates {
            if let Some(s) = self.best_threshold(rows, f) {
                let better = match &best {
                    None => true,
                    Some(b) => s.impurity + 1e-12 * (1.0 + s.impurity.abs()) < b.impurity,
                };
                if better {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_threshold(&mut self, rows: &[usize], feature: usize) -> Option<Split> {
        let x = self.x;
        let mut order = std::mem::take(&mut self.order);
        order.clear();
        order.extend_from_slice(rows);
        order.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]));
        let min_leaf = self.config.min_leaf;
        let n = order.len();
        let mut best: Option<Split> = None;
        let mut consider = |i: usize, impurity: f64| {
            // Split between order[i] and order[i + 1].
            let a = x[[order[i], feature]];
            let b = x[[order[i + 1], feature]];
            let left = i + 1;
            if a == b || left < min_leaf || n - left < min_leaf {
                return;
            }
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                threshold = a;
            }
            let better = match &best {
                None => true,
                Some(s) => impurity + 1e-12 * (1.0 + impurity.abs()) < s.impurity,
            };
            if better {
                best = Some(Split {
                    feature,
                    threshold,
                    impurity,
                });
            }
        };
        match self.task {
            Task::Regression => {
                let m = self.y.ncols();
                let mut total = vec![0.0; m];
                let mut total_sq = vec![0.0; m];
                for &r in order.iter() {
                    for (k, &v) in self.y.row(r).iter().enumerate() {
                        total[k] += v;
                        total_sq[k] += v * v;
                    }
                }
                let mut left = vec![0.0; m];
                let mut left_sq = vec![0.0; m];
                for (i, &r) in order[..n - 1].iter().enumerate() {
                    for (k, &v) in self.y.row(r).iter().enumerate() {
                        left[k] += v;
                        left_sq[k] += v * v;
                    }
                    let nl = (i + 1) as f64;
                    let nr = (n - i - 1) as f64;
                    let mut sse = 0.0;
                    for k in 0..m {
                        let right = total[k] - left[k];
                        let right_sq = total_sq[k] - left_sq[k];
                        sse += (left_sq[k] - left[k] * left[k] / nl) + (right_sq - right * right / nr);
                    }
                    consider(i, sse);
                }
            }
            Task::Classification => {
                let c = self.n_classes;
                let mut total = vec![0.0f64; c];
                for &r in order.iter() {
                    total[self.y[[r, 0]] as usize] += 1.0;
                }
                let mut left = vec![0.0f64; c];
                for (i, &r) in order[..n - 1].iter().enumerate() {
                    left[self.y[[r, 0]] as usize] += 1.0;
                    let nl = (i + 1) as f64;
                    let nr = (n - i - 1) as f64;
                    let (mut sl, mut sr) = (0.0, 0.0);
                    for k in 0..c {
                        sl += left[k] * left[k];
                        let rk = total[k] - left[k];
                        sr += rk * rk;
                    }
                    // n_l * gini_l + n_r * gini_r
                    consider(i, (nl - sl / nl) + (nr - sr / nr));
                }
            }
        }
        self.order = order;
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Draw `n` rows with replacement for each tree.
    pub bootstrap: bool,
}

impl ForestConfig {
    /// Bootstrap forest with task-default feature subsampling.
    pub fn new(n_trees: usize, max_depth: usize, task: Task) -> Self {
        ForestConfig {
            n_trees,
            tree: TreeConfig {
                max_depth,
                min_leaf: 1,
                feature_subsample: FeatureSubsample::forest_default(task),
            },
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub seeds: Vec<u64>,
}

/// Tree `i` is grown from seed `seed + i`, which drives both its bootstrap
/// sample and its per-split feature draws.
pub fn fit_forest(
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    task: Task,
    config: &ForestConfig,
    seed: u64,
) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
    }
    let n = features.nrows();
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut seeds = Vec::with_capacity(config.n_trees);
    for i in 0..config.n_trees as u64 {
        let tree_seed = seed.wrapping_add(i);
        let mut rng = rng(tree_seed, Stream::Tree);
        let rows: Vec<usize> = if config.bootstrap {
            (0..n).map(|_| rng.random_range(0..n.max(1))).collect()
        } else {
            (0..n).collect()
        };
        trees.push(fit_on_rows(features, targets, task, &config.tree, rows, &mut rng)?);
        seeds.push(tree_seed);
    }
    Ok(Forest { trees, seeds })
}

/// Structural summary of one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    /// `D_t`: one past the deepest level holding a branch.
    pub tree_depth: usize,
    /// `N_b(l)` for `l = 0..=D_t`.
    pub branches_per_level: Vec<usize>,
    /// `L_max` per input; `None` for inputs never split on.
    pub feature_max_level: Vec<Option<usize>>,
}

impl TreeTopology {
    /// `D_b = D_t - 1`, the number of hidden layers the mapping produces.
    pub fn branch_depth(&self) -> usize {
        self.tree_depth - 1
    }

    pub fn total_branches(&self) -> usize {
        self.branches_per_level.iter().sum()
    }

    pub fn n_split_features(&self) -> usize {
        self.feature_max_level.iter().filter(|l| l.is_some()).count()
    }
}

pub fn analyze_topology(tree: &DecisionTree) -> Result<TreeTopology> {
    let mut deepest_branch = None;
    let mut per_level = Vec::new();
    let mut feature_max_level = vec![None; tree.n_features];
    tree.root.walk(&mut |n| {
        if let Node::Branch { level, feature, .. } = n {
            let level = *level;
            deepest_branch = deepest_branch.max(Some(level));
            if per_level.len() <= level {
                per_level.resize(level + 1, 0);
            }
            per_level[level] += 1;
            let slot: &mut Option<usize> = &mut feature_max_level[*feature];
            *slot = (*slot).max(Some(level));
        }
    });
    let deepest = deepest_branch.ok_or(Error::NoBranches)?;
    let tree_depth = deepest + 1;
    per_level.resize(tree_depth + 1, 0);
    Ok(TreeTopology {
        tree_depth,
        branches_per_level: per_level,
        feature_max_level,
    })
}
