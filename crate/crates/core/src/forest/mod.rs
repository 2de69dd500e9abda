//! Random forest training, prediction and model files.
//!
//! Trees are grown independently; every tree derives its randomness from
//! (master seed, tree index) alone, so a forest is identical for any worker
//! count and a forest with `T` trees is a prefix of the forest with `T' > T`
//! trees under the same seed.

mod model_io;
mod predict;
mod split;
mod tree;

pub use model_io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use predict::{CellValue, OobPredictions, Predictions};
pub use split::{best_split, gini_impurity, split_gain, SplitCandidate, TargetView};
pub use tree::{LeafValue, Node, Tree};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ColumnData, ColumnType, Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Node splitting criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitRule {
    /// Exhaustive scan minimizing Gini impurity (classification).
    GiniImpurity,
    /// Exhaustive scan minimizing weighted variance (regression).
    WeightedVariance,
    /// Per candidate feature, only `num_random_cuts` uniformly drawn
    /// cutpoints are scored; with one cut this is the extremely randomized
    /// trees rule. Valid for both tasks.
    ExtraRandom { num_random_cuts: usize },
}

/// The full forest configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Candidate features drawn (without replacement) at each split.
    pub mtry: usize,
    /// Fraction of observations drawn per tree, in (0, 1].
    pub sample_fraction: f64,
    /// Draw observations with or without replacement.
    pub replace: bool,
    /// A node is split only while its size exceeds this floor.
    pub min_node_size: usize,
    pub num_trees: usize,
    pub split_rule: SplitRule,
    /// Optional cap on the number of splits from root to leaf.
    pub max_depth: Option<usize>,
}

impl HyperParams {
    /// Customary defaults: `mtry` is floor(sqrt(p)) for classification and
    /// max(1, p/3) for regression; the full sample is drawn with
    /// replacement; node-size floor 1 (classification) or 5 (regression);
    /// 500 trees.
    pub fn defaults(task: TaskKind, p: usize) -> HyperParams {
        let (mtry, min_node_size, split_rule) = match task {
            TaskKind::Classification => (
                ((p as f64).sqrt().floor() as usize).max(1),
                1,
                SplitRule::GiniImpurity,
            ),
            TaskKind::Regression => ((p / 3).max(1), 5, SplitRule::WeightedVariance),
        };
        HyperParams {
            mtry,
            sample_fraction: 1.0,
            replace: true,
            min_node_size,
            num_trees: 500,
            split_rule,
            max_depth: None,
        }
    }

    pub fn validate(&self, task: TaskKind, n: usize, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.mtry < 1 || self.mtry > p {
            return bad(format!("mtry {} outside [1, {p}]", self.mtry));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return bad(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            ));
        }
        if self.min_node_size < 1 {
            return bad("min_node_size must be at least 1".into());
        }
        if self.num_trees < 1 {
            return bad("num_trees must be at least 1".into());
        }
        if let Some(d) = self.max_depth {
            if d < 1 {
                return bad("max_depth must be at least 1".into());
            }
        }
        match (&self.split_rule, task) {
            (SplitRule::GiniImpurity, TaskKind::Regression) => {
                return Err(Error::TaskMismatch(
                    "gini split rule is classification-only".into(),
                ))
            }
            (SplitRule::WeightedVariance, TaskKind::Classification) => {
                return Err(Error::TaskMismatch(
                    "variance split rule is regression-only".into(),
                ))
            }
            (SplitRule::ExtraRandom { num_random_cuts }, _) => {
                if *num_random_cuts < 1 {
                    return bad("num_random_cuts must be at least 1".into());
                }
            }
            _ => {}
        }
        if bag_size(n, self.sample_fraction) == 0 {
            return Err(Error::EmptyBag {
                fraction: self.sample_fraction,
                n,
            });
        }
        Ok(())
    }
}

/// Task metadata baked into a trained forest.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskInfo {
    Classification { classes: Vec<String> },
    Regression,
}

impl TaskInfo {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskInfo::Classification { .. } => TaskKind::Classification,
            TaskInfo::Regression => TaskKind::Regression,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            TaskInfo::Classification { classes } => classes.len(),
            TaskInfo::Regression => 0,
        }
    }
}

/// Schema of one predictor as the forest expects it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub name: String,
    pub ty: ColumnType,
}

/// A trained ensemble with per-tree bag membership retained for out-of-bag
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub params: HyperParams,
    pub master_seed: u64,
    pub n_train: usize,
    pub task: TaskInfo,
    pub features: Vec<FeatureSchema>,
    /// Per categorical feature: rank of each level in target-mean order;
    /// `None` for numeric features.
    pub category_orders: Vec<Option<Vec<u32>>>,
    pub trees: Vec<Tree>,
    /// Per tree, the multiset of in-bag training row indices.
    pub bags: Vec<Vec<u32>>,
}

/// Number of observations drawn per tree: round-half-up of fraction * n.
pub fn bag_size(n: usize, sample_fraction: f64) -> usize {
    (sample_fraction * n as f64).round() as usize
}

/// Draw one tree's bag: `round(fraction * n)` indices, i.i.d. uniform with
/// replacement or a uniform duplicate-free subset without.
pub fn draw_bag(
    n: usize,
    sample_fraction: f64,
    replace: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>> {
    let size = bag_size(n, sample_fraction);
    if size == 0 {
        return Err(Error::EmptyBag {
            fraction: sample_fraction,
            n,
        });
    }
    if replace {
        Ok((0..size).map(|_| rng.gen_range(0..n) as u32).collect())
    } else {
        let mut indices: Vec<u32> = (0..n as u32).collect();
        for i in 0..size {
            let j = rng.gen_range(i..n);
            indices.swap(i, j);
        }
        indices.truncate(size);
        Ok(indices)
    }
}

impl Forest {
    /// Train a forest. Deterministic in (dataset, params, seed) for any
    /// `workers` count: each tree's randomness comes from its own
    /// (seed, tree index) stream, and categorical level orders are computed
    /// once from the full training data before any tree grows.
    pub fn train(
        ds: &Dataset,
        params: &HyperParams,
        seed: u64,
        workers: usize,
    ) -> Result<Forest> {
        params.validate(ds.task(), ds.n(), ds.p())?;
        if workers == 0 {
            return Err(Error::InvalidParams("workers must be at least 1".into()));
        }

        let category_orders = category_orders(ds);
        let columns = encode_columns(ds, &category_orders);
        let target = target_view(ds);
        let ctx = tree::GrowContext {
            columns: &columns,
            target,
            rule: &params.split_rule,
            mtry: params.mtry,
            min_node_size: params.min_node_size,
            max_depth: params.max_depth,
        };

        let n = ds.n();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Forest(format!("worker pool: {e}")))?;
        let grown: Vec<(Vec<u32>, Tree)> = pool.install(|| {
            (0..params.num_trees)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(seed, t as u64);
                    let bag = draw_bag(n, params.sample_fraction, params.replace, &mut rng)
                        .expect("bag size checked by validate");
                    let tree = tree::grow_tree(&ctx, bag.clone(), &mut rng);
                    (bag, tree)
                })
                .collect()
        });

        let mut bags = Vec::with_capacity(grown.len());
        let mut trees = Vec::with_capacity(grown.len());
        for (bag, tree) in grown {
            bags.push(bag);
            trees.push(tree);
        }

        let features = ds
            .columns
            .iter()
            .map(|c| FeatureSchema {
                name: c.name.clone(),
                ty: c.column_type(),
            })
            .collect();
        let task = match ds.class_labels() {
            Some(classes) => TaskInfo::Classification {
                classes: classes.to_vec(),
            },
            None => TaskInfo::Regression,
        };

        Ok(Forest {
            params: params.clone(),
            master_seed: seed,
            n_train: n,
            task,
            features,
            category_orders,
            trees,
            bags,
        })
    }
}

/// Level order per categorical feature, computed once per forest from the
/// full training data: levels sort by the frequency of the second class
/// (binary), the frequency of the first class (multiclass), or the target
/// mean (regression); levels absent from the data sort last; ties keep
/// level-index order.
fn category_orders(ds: &Dataset) -> Vec<Option<Vec<u32>>> {
    ds.columns
        .iter()
        .map(|col| match &col.data {
            ColumnData::Numeric(_) => None,
            ColumnData::Categorical { levels, codes } => {
                let num_levels = levels.len();
                let mut counts = vec![0u32; num_levels];
                let mut stats = vec![0.0f64; num_levels];
                match &ds.target {
                    crate::data::Target::Classification {
                        classes,
                        codes: target_codes,
                    } => {
                        let watched_class = if classes.len() == 2 { 1 } else { 0 };
                        for (i, &code) in codes.iter().enumerate() {
                            counts[code as usize] += 1;
                            if target_codes[i] == watched_class {
                                stats[code as usize] += 1.0;
                            }
                        }
                    }
                    crate::data::Target::Regression(values) => {
                        for (i, &code) in codes.iter().enumerate() {
                            counts[code as usize] += 1;
                            stats[code as usize] += values[i];
                        }
                    }
                }
                let scores: Vec<f64> = counts
                    .iter()
                    .zip(&stats)
                    .map(|(&c, &s)| if c == 0 { f64::INFINITY } else { s / f64::from(c) })
                    .collect();
                let mut order: Vec<usize> = (0..num_levels).collect();
                order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
                let mut ranks = vec![0u32; num_levels];
                for (rank, &level) in order.iter().enumerate() {
                    ranks[level] = rank as u32;
                }
                Some(ranks)
            }
        })
        .collect()
}

/// Column-major encoded training matrix: numeric values pass through,
/// categorical codes map to their target-order rank.
fn encode_columns(ds: &Dataset, orders: &[Option<Vec<u32>>]) -> Vec<Vec<f64>> {
    ds.columns
        .iter()
        .zip(orders)
        .map(|(col, order)| match (&col.data, order) {
            (ColumnData::Numeric(values), _) => values.clone(),
            (ColumnData::Categorical { codes, .. }, Some(ranks)) => codes
                .iter()
                .map(|&code| f64::from(ranks[code as usize]))
                .collect(),
            (ColumnData::Categorical { .. }, None) => unreachable!("order built per column"),
        })
        .collect()
}

fn target_view(ds: &Dataset) -> TargetView<'_> {
    match &ds.target {
        crate::data::Target::Classification { classes, codes } => TargetView::Classes {
            codes,
            num_classes: classes.len(),
        },
        crate::data::Target::Regression(values) => TargetView::Reals(values),
    }
}
