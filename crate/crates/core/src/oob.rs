//! Out-of-bag model assessment: scalar objectives, convergence curves over
//! the tree count, permutation variable importance and importance-rank
//! stability.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{Forest, HyperParams, LeafValue, OobPredictions, TaskInfo, Tree};
use crate::metrics::{evaluate, EvalInput, Evaluation, Measure};
use crate::rng::stream_rng;

/// Measure values along a grid of tree counts; `values[m][i]` is measure `m`
/// evaluated with the first `tree_counts[i]` trees.
#[derive(Debug, Clone, PartialEq)]
pub struct OobCurve {
    pub tree_counts: Vec<usize>,
    pub measures: Vec<Measure>,
    pub values: Vec<Vec<f64>>,
}

/// Per-feature permutation importance with a standard error over
/// permutation repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub name: String,
    pub importance: f64,
    pub std_error: f64,
}

/// Scalar OOB objective: the measure evaluated on the out-of-bag
/// aggregation, uncovered rows excluded.
pub fn oob_measure(forest: &Forest, ds: &Dataset, measure: Measure) -> Result<f64> {
    let oob = forest.oob_predictions(ds)?;
    Ok(evaluate_oob(forest, ds, measure, &oob)?.value)
}

fn evaluate_oob(
    forest: &Forest,
    ds: &Dataset,
    measure: Measure,
    oob: &OobPredictions,
) -> Result<Evaluation> {
    if oob.covered_rows() == 0 {
        return Err(Error::NoOobObservations);
    }
    match oob {
        OobPredictions::Probabilities { probs, .. } => evaluate(
            measure,
            &EvalInput::Probabilities {
                truth: ds.class_codes().ok_or_else(|| {
                    Error::TaskMismatch("classification dataset expected".into())
                })?,
                probs,
                num_classes: forest.num_classes(),
            },
        ),
        OobPredictions::Values { values, .. } => evaluate(
            measure,
            &EvalInput::Values {
                truth: ds
                    .regression_values()
                    .ok_or_else(|| Error::TaskMismatch("regression dataset expected".into()))?,
                predicted: values,
            },
        ),
    }
}

/// OOB measure values over a grid of tree counts. The value at grid point
/// `t` aggregates only the first `t` trees; rows without any OOB tree among
/// that prefix are excluded at that point.
pub fn oob_curve(
    forest: &Forest,
    ds: &Dataset,
    measures: &[Measure],
    grid: &[usize],
) -> Result<OobCurve> {
    if ds.n() != forest.n_train {
        return Err(Error::SchemaMismatch(format!(
            "dataset has {} rows, forest was trained on {}",
            ds.n(),
            forest.n_train
        )));
    }
    if measures.is_empty() {
        return Err(Error::Oob("no measures given".into()));
    }
    let mut tree_counts: Vec<usize> = grid.to_vec();
    tree_counts.sort_unstable();
    tree_counts.dedup();
    if tree_counts.is_empty() {
        return Err(Error::Oob("tree-count grid is empty".into()));
    }
    if tree_counts[0] < 1 || *tree_counts.last().unwrap() > forest.trees.len() {
        return Err(Error::Oob(format!(
            "tree-count grid must lie within [1, {}]",
            forest.trees.len()
        )));
    }

    let encoded = forest.encode_dataset(ds)?;
    let in_bag = forest.in_bag_masks();
    let n = ds.n();
    let k = forest.num_classes();
    let is_classification = forest.task.kind() == TaskKind::Classification;

    // running per-row accumulators over the tree prefix
    let mut acc = vec![vec![0.0f64; k.max(1)]; n];
    let mut counts = vec![0u32; n];
    let mut values = vec![Vec::with_capacity(tree_counts.len()); measures.len()];

    let mut next_grid = 0usize;
    for (t, tree) in forest.trees.iter().enumerate() {
        for i in 0..n {
            if in_bag[t][i] {
                continue;
            }
            let leaf = tree.leaf_for(&|f| encoded[f][i]);
            if is_classification {
                for (a, f) in acc[i].iter_mut().zip(leaf.frequencies()) {
                    *a += f;
                }
            } else {
                acc[i][0] += leaf.mean();
            }
            counts[i] += 1;
        }
        while next_grid < tree_counts.len() && tree_counts[next_grid] == t + 1 {
            let snapshot = snapshot_oob(&acc, &counts, k, is_classification);
            for (m, &measure) in measures.iter().enumerate() {
                let eval = evaluate_oob(forest, ds, measure, &snapshot)?;
                values[m].push(eval.value);
            }
            next_grid += 1;
        }
        if next_grid == tree_counts.len() {
            break;
        }
    }

    Ok(OobCurve {
        tree_counts,
        measures: measures.to_vec(),
        values,
    })
}

fn snapshot_oob(
    acc: &[Vec<f64>],
    counts: &[u32],
    k: usize,
    is_classification: bool,
) -> OobPredictions {
    if is_classification {
        let probs = acc
            .iter()
            .zip(counts)
            .map(|(a, &c)| {
                if c == 0 {
                    None
                } else {
                    Some(a.iter().take(k).map(|v| v / f64::from(c)).collect())
                }
            })
            .collect();
        OobPredictions::Probabilities {
            probs,
            tree_counts: counts.to_vec(),
        }
    } else {
        let values = acc
            .iter()
            .zip(counts)
            .map(|(a, &c)| if c == 0 { None } else { Some(a[0] / f64::from(c)) })
            .collect();
        OobPredictions::Values {
            values,
            tree_counts: counts.to_vec(),
        }
    }
}

/// Permutation variable importance, Breiman style: for every tree and every
/// repetition, feature `j`'s column is permuted within the tree's OOB rows
/// and the drop in that tree's OOB measure is averaged. Values are oriented
/// so that positive means important for both measure directions.
pub fn permutation_importance(
    forest: &Forest,
    ds: &Dataset,
    measure: Measure,
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repetitions == 0 {
        return Err(Error::Oob("repetitions must be at least 1".into()));
    }
    measure.check_task(forest.task.kind(), forest.num_classes())?;
    if ds.n() != forest.n_train {
        return Err(Error::SchemaMismatch(format!(
            "dataset has {} rows, forest was trained on {}",
            ds.n(),
            forest.n_train
        )));
    }
    let encoded = forest.encode_dataset(ds)?;
    let in_bag = forest.in_bag_masks();
    let p = forest.features.len();
    let orientation = match measure.direction() {
        crate::metrics::Direction::Minimize => 1.0,
        crate::metrics::Direction::Maximize => -1.0,
    };

    // per tree: a (repetitions x p) matrix of oriented measure drops, or None
    // when the tree's OOB set cannot be scored
    let per_tree: Vec<Option<Vec<Vec<f64>>>> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let oob_rows: Vec<usize> = (0..forest.n_train).filter(|&i| !in_bag[t][i]).collect();
            if oob_rows.is_empty() {
                return Ok(None);
            }
            let baseline = match tree_oob_measure(tree, &encoded, ds, forest, &oob_rows, measure, None) {
                Ok(v) => v,
                Err(_) => return Ok(None), // e.g. single-class OOB set under AUC
            };
            let mut rng = stream_rng(seed, t as u64);
            let mut drops = vec![vec![0.0f64; p]; repetitions];
            for rep_drops in drops.iter_mut() {
                for j in 0..p {
                    let mut perm: Vec<usize> = (0..oob_rows.len()).collect();
                    perm.shuffle(&mut rng);
                    let permuted = tree_oob_measure(
                        tree,
                        &encoded,
                        ds,
                        forest,
                        &oob_rows,
                        measure,
                        Some((j, &perm)),
                    )?;
                    rep_drops[j] = orientation * (permuted - baseline);
                }
            }
            Ok(Some(drops))
        })
        .collect::<Result<_>>()?;

    let usable: Vec<&Vec<Vec<f64>>> = per_tree.iter().flatten().collect();
    if usable.is_empty() {
        return Err(Error::NoOobObservations);
    }

    // mean over trees within each repetition, then mean and sd over reps
    let mut rep_means = vec![vec![0.0f64; p]; repetitions];
    for drops in &usable {
        for (rep_mean, rep_drops) in rep_means.iter_mut().zip(drops.iter()) {
            for (m, d) in rep_mean.iter_mut().zip(rep_drops) {
                *m += d;
            }
        }
    }
    let num_trees = usable.len() as f64;
    rep_means
        .iter_mut()
        .for_each(|row| row.iter_mut().for_each(|v| *v /= num_trees));

    let features = (0..p)
        .map(|j| {
            let mean = rep_means.iter().map(|row| row[j]).sum::<f64>() / repetitions as f64;
            let std_error = if repetitions < 2 {
                0.0
            } else {
                let var = rep_means
                    .iter()
                    .map(|row| (row[j] - mean) * (row[j] - mean))
                    .sum::<f64>()
                    / (repetitions as f64 - 1.0);
                (var / repetitions as f64).sqrt()
            };
            FeatureImportance {
                name: forest.features[j].name.clone(),
                importance: mean,
                std_error,
            }
        })
        .collect();
    Ok(ImportanceReport { features })
}

/// Measure of a single tree on its OOB rows, optionally with feature `j`'s
/// values permuted among those rows.
fn tree_oob_measure(
    tree: &Tree,
    encoded: &[Vec<f64>],
    ds: &Dataset,
    forest: &Forest,
    oob_rows: &[usize],
    measure: Measure,
    permutation: Option<(usize, &[usize])>,
) -> Result<f64> {
    match &forest.task {
        TaskInfo::Classification { classes } => {
            let truth: Vec<u32> = {
                let codes = ds.class_codes().expect("classification dataset");
                oob_rows.iter().map(|&i| codes[i]).collect()
            };
            let probs: Vec<Option<Vec<f64>>> = oob_rows
                .iter()
                .enumerate()
                .map(|(pos, &row)| {
                    let leaf = walk_permuted(tree, encoded, oob_rows, permutation, pos, row);
                    Some(leaf.frequencies())
                })
                .collect();
            Ok(evaluate(
                measure,
                &EvalInput::Probabilities {
                    truth: &truth,
                    probs: &probs,
                    num_classes: classes.len(),
                },
            )?
            .value)
        }
        TaskInfo::Regression => {
            let values = ds.regression_values().expect("regression dataset");
            let truth: Vec<f64> = oob_rows.iter().map(|&i| values[i]).collect();
            let predicted: Vec<Option<f64>> = oob_rows
                .iter()
                .enumerate()
                .map(|(pos, &row)| {
                    let leaf = walk_permuted(tree, encoded, oob_rows, permutation, pos, row);
                    Some(leaf.mean())
                })
                .collect();
            Ok(evaluate(
                measure,
                &EvalInput::Values {
                    truth: &truth,
                    predicted: &predicted,
                },
            )?
            .value)
        }
    }
}

fn walk_permuted<'a>(
    tree: &'a Tree,
    encoded: &[Vec<f64>],
    oob_rows: &[usize],
    permutation: Option<(usize, &[usize])>,
    pos: usize,
    row: usize,
) -> &'a LeafValue {
    match permutation {
        None => tree.leaf_for(&|f| encoded[f][row]),
        Some((feature, perm)) => tree.leaf_for(&|f| {
            if f == feature {
                encoded[f][oob_rows[perm[pos]]]
            } else {
                encoded[f][row]
            }
        }),
    }
}

/// Train `num_forests` forests with master seeds `seed..seed+m-1`, compute
/// their permutation importances and return the pairwise Spearman
/// correlation matrix of the importance rankings.
pub fn importance_stability(
    ds: &Dataset,
    params: &HyperParams,
    num_forests: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    if num_forests < 2 {
        return Err(Error::Oob("stability needs at least 2 forests".into()));
    }
    if ds.p() < 2 {
        return Err(Error::Oob("stability needs at least 2 features".into()));
    }
    let measure = Measure::default_importance(ds.task());
    let mut importances = Vec::with_capacity(num_forests);
    for i in 0..num_forests {
        let forest_seed = seed.wrapping_add(i as u64);
        let forest = Forest::train(ds, params, forest_seed, workers)?;
        let report = permutation_importance(&forest, ds, measure, 1, forest_seed)?;
        importances.push(
            report
                .features
                .iter()
                .map(|f| f.importance)
                .collect::<Vec<f64>>(),
        );
    }
    let mut matrix = vec![vec![0.0f64; num_forests]; num_forests];
    for a in 0..num_forests {
        matrix[a][a] = 1.0;
        for b in (a + 1)..num_forests {
            let rho = spearman(&importances[a], &importances[b]);
            matrix[a][b] = rho;
            matrix[b][a] = rho;
        }
    }
    Ok(matrix)
}

impl Measure {
    /// Default importance measure: error rate for classification, squared
    /// error for regression.
    pub fn default_importance(task: TaskKind) -> Measure {
        match task {
            TaskKind::Classification => Measure::Mmce,
            TaskKind::Regression => Measure::Mse,
        }
    }
}

/// Spearman rank correlation with average ranks for ties. Identical vectors
/// correlate at 1; degenerate (constant) rankings correlate at 0 unless
/// identical.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        var_a += (x - mean) * (x - mean);
        var_b += (y - mean) * (y - mean);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut ranks = vec![0.0f64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = ((i + 1) + (j + 1)) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_sparse_signal, Column, ColumnData, Dataset, Target};
    use crate::forest::HyperParams;

    fn balanced_binary(n: usize) -> Dataset {
        Dataset::new(
            "b",
            vec![Column {
                name: "x".into(),
                data: ColumnData::Numeric((0..n).map(|i| i as f64).collect()),
            }],
            "y",
            Target::Classification {
                classes: vec!["a".into(), "b".into()],
                codes: (0..n).map(|i| u32::from(i % 2 == 1)).collect(),
            },
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_forest_oob_sits_at_the_prior() {
        // balanced classes: single-leaf trees predict their bag's priors, so
        // OOB probabilities hover at (0.5, 0.5) and the Brier score at 0.5.
        // The argmax error is no better than chance; it drifts above 0.5
        // because a row's OOB bags under-represent its own class.
        let ds = balanced_binary(40);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.min_node_size = ds.n();
        params.num_trees = 60;
        let forest = Forest::train(&ds, &params, 4, 1).unwrap();
        let brier = oob_measure(&forest, &ds, Measure::BrierMulticlass).unwrap();
        assert!((brier - 0.5).abs() < 0.05, "brier {brier}");
        let mmce = oob_measure(&forest, &ds, Measure::Mmce).unwrap();
        assert!(mmce >= 0.45, "mmce {mmce}");
    }

    #[test]
    fn exactly_balanced_priors_tie_break_to_first_class() {
        // hand-built forest with exactly (0.5, 0.5) leaves: the argmax tie
        // rule picks the first class, so MMCE is exactly one half
        use crate::forest::{FeatureSchema, LeafValue, Node, SplitRule, TaskInfo, Tree};
        let ds = balanced_binary(4);
        let leaf = Tree {
            nodes: vec![Node::Leaf(LeafValue::Counts(vec![2, 2]))],
        };
        let forest = Forest {
            params: HyperParams {
                mtry: 1,
                sample_fraction: 0.5,
                replace: false,
                min_node_size: 4,
                num_trees: 2,
                split_rule: SplitRule::GiniImpurity,
                max_depth: None,
            },
            master_seed: 0,
            n_train: 4,
            task: TaskInfo::Classification {
                classes: vec!["a".into(), "b".into()],
            },
            features: vec![FeatureSchema {
                name: "x".into(),
                ty: crate::data::ColumnType::Numeric,
            }],
            category_orders: vec![None],
            trees: vec![leaf.clone(), leaf],
            bags: vec![vec![0, 1], vec![2, 3]],
        };
        let value = oob_measure(&forest, &ds, Measure::Mmce).unwrap();
        assert_eq!(value, 0.5);
    }

    #[test]
    fn empty_oob_is_an_error() {
        let ds = balanced_binary(10);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.replace = false; // full sample without replacement
        params.num_trees = 3;
        let forest = Forest::train(&ds, &params, 0, 1).unwrap();
        assert!(matches!(
            oob_measure(&forest, &ds, Measure::Mmce),
            Err(Error::NoOobObservations)
        ));
    }

    #[test]
    fn curve_at_full_tree_count_equals_oob_measure() {
        let ds = synth_sparse_signal(80, 2, 3, 3).unwrap();
        let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
        params.num_trees = 25;
        let forest = Forest::train(&ds, &params, 5, 2).unwrap();
        let curve = oob_curve(
            &forest,
            &ds,
            &[Measure::BrierMulticlass, Measure::Mmce],
            &[1, 5, 25],
        )
        .unwrap();
        assert_eq!(curve.tree_counts, vec![1, 5, 25]);
        let full = oob_measure(&forest, &ds, Measure::BrierMulticlass).unwrap();
        assert_eq!(curve.values[0][2], full);
        let full_mmce = oob_measure(&forest, &ds, Measure::Mmce).unwrap();
        assert_eq!(curve.values[1][2], full_mmce);
    }

    #[test]
    fn curve_rejects_empty_or_out_of_range_grid() {
        let ds = balanced_binary(20);
        let mut params = HyperParams::defaults(TaskKind::Classification, 1);
        params.num_trees = 5;
        let forest = Forest::train(&ds, &params, 0, 1).unwrap();
        assert!(oob_curve(&forest, &ds, &[Measure::Mmce], &[]).is_err());
        assert!(oob_curve(&forest, &ds, &[Measure::Mmce], &[0]).is_err());
        assert!(oob_curve(&forest, &ds, &[Measure::Mmce], &[6]).is_err());
    }

    #[test]
    fn constant_feature_importance_is_exactly_zero() {
        let mut ds = synth_sparse_signal(60, 1, 1, 8).unwrap();
        ds.columns[1] = Column {
            name: "constant".into(),
            data: ColumnData::Numeric(vec![1.0; 60]),
        };
        let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
        params.num_trees = 30;
        let forest = Forest::train(&ds, &params, 2, 2).unwrap();
        let report = permutation_importance(&forest, &ds, Measure::Mmce, 2, 7).unwrap();
        assert_eq!(report.features[1].importance, 0.0);
        assert_eq!(report.features[1].std_error, 0.0);
    }

    #[test]
    fn informative_feature_outranks_noise() {
        let ds = synth_sparse_signal_strong();
        let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
        params.num_trees = 60;
        let forest = Forest::train(&ds, &params, 3, 2).unwrap();
        let report = permutation_importance(&forest, &ds, Measure::Mmce, 1, 5).unwrap();
        let informative = report.features[0].importance;
        let max_noise = report.features[1..]
            .iter()
            .map(|f| f.importance)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            informative > max_noise,
            "informative {informative} vs noise {max_noise}"
        );
    }

    fn synth_sparse_signal_strong() -> Dataset {
        crate::data::synth_sparse_signal_with_shift(300, 1, 6, 2.5, 11).unwrap()
    }

    #[test]
    fn importance_is_deterministic_in_seed() {
        let ds = synth_sparse_signal(60, 2, 2, 1).unwrap();
        let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
        params.num_trees = 10;
        let forest = Forest::train(&ds, &params, 1, 2).unwrap();
        let a = permutation_importance(&forest, &ds, Measure::Mmce, 3, 11).unwrap();
        let b = permutation_importance(&forest, &ds, Measure::Mmce, 3, 11).unwrap();
        assert_eq!(a, b);
        let c = permutation_importance(&forest, &ds, Measure::Mmce, 3, 12).unwrap();
        assert!(a != c || a.features.iter().all(|f| f.importance == 0.0));
    }

    #[test]
    fn stability_matrix_is_symmetric_with_unit_diagonal() {
        let ds = synth_sparse_signal(80, 2, 3, 5).unwrap();
        let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
        params.num_trees = 15;
        let matrix = importance_stability(&ds, &params, 3, 21, 2).unwrap();
        for a in 0..3 {
            assert_eq!(matrix[a][a], 1.0);
            for b in 0..3 {
                assert_eq!(matrix[a][b], matrix[b][a]);
                assert!(matrix[a][b] >= -1.0 - 1e-12 && matrix[a][b] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn stability_grows_with_tree_count() {
        // importance estimates from many trees rank features more
        // consistently across forests than estimates from a handful
        let ds = synth_sparse_signal(200, 3, 7, 31).unwrap();
        let mean_off_diagonal = |num_trees: usize| {
            let mut params = HyperParams::defaults(TaskKind::Classification, ds.p());
            params.num_trees = num_trees;
            let matrix = importance_stability(&ds, &params, 4, 9, 2).unwrap();
            let m = matrix.len();
            let mut total = 0.0;
            for a in 0..m {
                for b in 0..m {
                    if a != b {
                        total += matrix[a][b];
                    }
                }
            }
            total / (m * (m - 1)) as f64
        };
        let few = mean_off_diagonal(5);
        let many = mean_off_diagonal(200);
        assert!(many > few, "stability {many} with 200 trees vs {few} with 5");
    }

    #[test]
    fn stability_rejects_degenerate_inputs() {
        let ds = synth_sparse_signal(30, 2, 2, 0).unwrap();
        let params = HyperParams::defaults(TaskKind::Classification, ds.p());
        assert!(importance_stability(&ds, &params, 1, 0, 1).is_err());

        let one_feature = synth_sparse_signal(30, 1, 0, 0).unwrap();
        let params = HyperParams::defaults(TaskKind::Classification, 1);
        assert!(importance_stability(&one_feature, &params, 2, 0, 1).is_err());
    }

    #[test]
    fn spearman_handles_ties_and_identity() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        assert!((rho + 1.0).abs() < 1e-12);
        // constant vector against non-constant: no rank variance
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }
}
