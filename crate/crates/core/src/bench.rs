//! Repeated cross-validation benchmark harness: runs tuners and the default
//! forest over datasets, records per-fold measure values and runtimes,
//! imputes failures, and aggregates mean ranks.

use std::io::Write;
use std::time::Instant;

use crate::data::{make_cv_plan, Dataset};
use crate::error::{Error, Result};
use crate::forest::{Forest, HyperParams};
use crate::metrics::{Direction, Measure};
use crate::rng::derive_seed;
use crate::tuner::{
    test_measure, tune, tune_grid_caret, tune_mtry_walk, tune_random, TuneConfig, TunedParam,
};

/// A benchmarked fitting strategy. Tuning happens inside every training
/// fold; the fitted forest is evaluated on the held-out fold.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchMethod {
    /// Untuned forest with task defaults.
    Default { num_trees: usize },
    /// The SMBO tuner.
    Smbo {
        measure: Measure,
        num_trees: usize,
        warmup: usize,
        iters: usize,
        tuned: Vec<TunedParam>,
    },
    /// The mtry walk.
    MtryWalk { num_trees: usize },
    /// Three-point mtry grid with bootstrap scoring.
    CaretGrid {
        num_trees: usize,
        bootstrap_iters: usize,
    },
    /// Uniform random search over the default space.
    RandomSearch {
        measure: Measure,
        num_trees: usize,
        points: usize,
    },
}

impl BenchMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Default { .. } => "default",
            BenchMethod::Smbo { .. } => "smbo",
            BenchMethod::MtryWalk { .. } => "mtry_walk",
            BenchMethod::CaretGrid { .. } => "caret_grid",
            BenchMethod::RandomSearch { .. } => "random_search",
        }
    }

    fn fit(&self, train: &Dataset, seed: u64, workers: usize) -> Result<Forest> {
        match self {
            BenchMethod::Default { num_trees } => {
                let mut params = HyperParams::defaults(train.task(), train.p());
                params.num_trees = *num_trees;
                Forest::train(train, &params, seed, workers)
            }
            BenchMethod::Smbo {
                measure,
                num_trees,
                warmup,
                iters,
                tuned,
            } => {
                let mut config = TuneConfig::new(*measure);
                config.num_trees = *num_trees;
                config.warmup = *warmup;
                config.iters = *iters;
                config.tuned = tuned.clone();
                config.workers = workers;
                config.seed = seed;
                Ok(tune(train, &config)?.model)
            }
            BenchMethod::MtryWalk { num_trees } => {
                let result = tune_mtry_walk(train, 2.0, 0.05, *num_trees, seed, workers)?;
                Forest::train(train, &result.params, seed, workers)
            }
            BenchMethod::CaretGrid {
                num_trees,
                bootstrap_iters,
            } => {
                let result =
                    tune_grid_caret(train, *bootstrap_iters, *num_trees, seed, workers)?;
                Forest::train(train, &result.params, seed, workers)
            }
            BenchMethod::RandomSearch {
                measure,
                num_trees,
                points,
            } => {
                let result = tune_random(train, *points, *measure, *num_trees, seed, workers)?;
                Forest::train(train, &result.params, seed, workers)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub folds: usize,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Raw and aggregated benchmark data. Indexing is `[dataset][method]`;
/// per-fold vectors run over repetitions then folds. `cells` holds
/// per-measure means over successful folds and is completed by
/// [`impute_failures`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub measures: Vec<Measure>,
    /// `fold_values[d][m][fold]` is `Some(values per measure)` on success.
    pub fold_values: Vec<Vec<Vec<Option<Vec<f64>>>>>,
    /// Wall seconds of fitting (including tuning) per successful fold.
    pub fold_runtimes: Vec<Vec<Vec<Option<f64>>>>,
    /// Mean measure value over successful folds; `None` until imputed when
    /// every fold failed.
    pub cells: Vec<Vec<Vec<Option<f64>>>>,
    /// Fraction of folds on which the method failed.
    pub failures: Vec<Vec<f64>>,
    /// Mean fit runtime over successful folds.
    pub runtimes: Vec<Vec<Option<f64>>>,
}

impl BenchResult {
    /// Assemble a result from fold-level outcomes, computing per-cell means
    /// over successes, failure fractions and mean runtimes. Public so test
    /// fixtures can drive the imputation and ranking rules directly.
    pub fn from_parts(
        datasets: Vec<String>,
        methods: Vec<String>,
        measures: Vec<Measure>,
        fold_values: Vec<Vec<Vec<Option<Vec<f64>>>>>,
        fold_runtimes: Vec<Vec<Vec<Option<f64>>>>,
    ) -> BenchResult {
        let num_measures = measures.len();
        let mut cells = Vec::with_capacity(datasets.len());
        let mut failures = Vec::with_capacity(datasets.len());
        let mut runtimes = Vec::with_capacity(datasets.len());
        for (d_values, d_runtimes) in fold_values.iter().zip(&fold_runtimes) {
            let mut d_cells = Vec::with_capacity(methods.len());
            let mut d_failures = Vec::with_capacity(methods.len());
            let mut d_mean_runtimes = Vec::with_capacity(methods.len());
            for (m_values, m_runtimes) in d_values.iter().zip(d_runtimes) {
                let total = m_values.len();
                let failed = m_values.iter().filter(|v| v.is_none()).count();
                d_failures.push(failed as f64 / total as f64);
                let mut means = Vec::with_capacity(num_measures);
                for k in 0..num_measures {
                    let ok: Vec<f64> = m_values
                        .iter()
                        .flatten()
                        .map(|values| values[k])
                        .collect();
                    means.push(if ok.is_empty() {
                        None
                    } else {
                        Some(ok.iter().sum::<f64>() / ok.len() as f64)
                    });
                }
                d_cells.push(means);
                let ok_times: Vec<f64> = m_runtimes.iter().flatten().copied().collect();
                d_mean_runtimes.push(if ok_times.is_empty() {
                    None
                } else {
                    Some(ok_times.iter().sum::<f64>() / ok_times.len() as f64)
                });
            }
            cells.push(d_cells);
            failures.push(d_failures);
            runtimes.push(d_mean_runtimes);
        }
        BenchResult {
            datasets,
            methods,
            measures,
            fold_values,
            fold_runtimes,
            cells,
            failures,
            runtimes,
        }
    }

    /// Mean cell value across datasets for one (method, measure) pair;
    /// requires an imputed result.
    pub fn mean_over_datasets(&self, method: usize, measure: usize) -> Option<f64> {
        let values: Option<Vec<f64>> = self
            .cells
            .iter()
            .map(|d| d[method][measure])
            .collect();
        values.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Run every method on every dataset under repeated k-fold CV. Per-fold
/// failures are caught and recorded, not fatal.
pub fn run_benchmark(
    datasets: &[Dataset],
    methods: &[BenchMethod],
    measures: &[Measure],
    config: &BenchConfig,
) -> Result<BenchResult> {
    if datasets.is_empty() || methods.is_empty() || measures.is_empty() {
        return Err(Error::Bench(
            "need at least one dataset, method and measure".into(),
        ));
    }
    let mut fold_values = Vec::with_capacity(datasets.len());
    let mut fold_runtimes = Vec::with_capacity(datasets.len());
    for (d_idx, ds) in datasets.iter().enumerate() {
        for measure in measures {
            measure.check_task(ds.task(), ds.num_classes())?;
        }
        let plan = make_cv_plan(ds, config.folds, config.reps, derive_seed(config.seed, d_idx as u64))?;
        let mut d_values = vec![Vec::new(); methods.len()];
        let mut d_runtimes = vec![Vec::new(); methods.len()];
        for rep in 0..config.reps {
            for fold in 0..config.folds {
                let (train_rows, test_rows) = plan.train_test(rep, fold);
                let train = ds.subset(&train_rows)?;
                let test = ds.subset(&test_rows)?;
                for (m_idx, method) in methods.iter().enumerate() {
                    let stream = (((d_idx * methods.len() + m_idx) * config.reps + rep)
                        * config.folds
                        + fold) as u64;
                    let seed = derive_seed(config.seed, stream);
                    let started = Instant::now();
                    let outcome = method.fit(&train, seed, config.workers).and_then(|forest| {
                        let values: Result<Vec<f64>> = measures
                            .iter()
                            .map(|&measure| test_measure(&forest, &test, measure))
                            .collect();
                        values
                    });
                    match outcome {
                        Ok(values) => {
                            d_values[m_idx].push(Some(values));
                            d_runtimes[m_idx].push(Some(started.elapsed().as_secs_f64()));
                        }
                        Err(_) => {
                            d_values[m_idx].push(None);
                            d_runtimes[m_idx].push(None);
                        }
                    }
                }
            }
        }
        fold_values.push(d_values);
        fold_runtimes.push(d_runtimes);
    }
    Ok(BenchResult::from_parts(
        datasets.iter().map(|d| d.name.clone()).collect(),
        methods.iter().map(|m| m.name().to_string()).collect(),
        measures.to_vec(),
        fold_values,
        fold_runtimes,
    ))
}

/// Failure threshold above which a method inherits the worst competing
/// value instead of its own mean.
pub const FAILURE_THRESHOLD: f64 = 0.20;

/// Fill every cell: methods failing on more than 20 percent of the folds of
/// a dataset receive the worst value of the competing methods (oriented per
/// measure); below that, the mean over their successful folds stands (which
/// equals imputing failed folds by that mean). Errors when every method
/// failed that hard on some dataset.
pub fn impute_failures(result: &BenchResult) -> Result<BenchResult> {
    let mut imputed = result.clone();
    for d in 0..result.datasets.len() {
        let trustworthy: Vec<usize> = (0..result.methods.len())
            .filter(|&m| result.failures[d][m] <= FAILURE_THRESHOLD)
            .collect();
        if trustworthy.is_empty() {
            return Err(Error::AllMethodsFailed(result.datasets[d].clone()));
        }
        for m in 0..result.methods.len() {
            if result.failures[d][m] <= FAILURE_THRESHOLD {
                continue; // mean over successes already stands
            }
            let competitors: Vec<usize> =
                trustworthy.iter().copied().filter(|&c| c != m).collect();
            if competitors.is_empty() {
                return Err(Error::AllMethodsFailed(result.datasets[d].clone()));
            }
            for (k, measure) in result.measures.iter().enumerate() {
                let worst = competitors
                    .iter()
                    .filter_map(|&c| result.cells[d][c][k])
                    .reduce(|acc, v| match measure.direction() {
                        Direction::Minimize => acc.max(v),
                        Direction::Maximize => acc.min(v),
                    });
                imputed.cells[d][m][k] = worst;
            }
            let worst_runtime = competitors
                .iter()
                .filter_map(|&c| result.runtimes[d][c])
                .reduce(f64::max);
            imputed.runtimes[d][m] = worst_runtime;
        }
    }
    Ok(imputed)
}

/// Mean ranks per method: for every dataset and measure the methods are
/// ranked 1 (best) to M oriented by the measure's direction, ties receive
/// the average rank, and ranks are averaged over datasets. Runtime is
/// ranked ascending as an extra column.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub methods: Vec<String>,
    /// Measure names plus a final "runtime" entry.
    pub columns: Vec<String>,
    /// `mean_ranks[column][method]`.
    pub mean_ranks: Vec<Vec<f64>>,
}

pub fn aggregate_ranks(result: &BenchResult) -> Result<RankSummary> {
    let num_methods = result.methods.len();
    let num_datasets = result.datasets.len();
    let mut columns: Vec<String> = result.measures.iter().map(|m| m.name().to_string()).collect();
    columns.push("runtime".to_string());
    let mut mean_ranks = vec![vec![0.0f64; num_methods]; columns.len()];

    for d in 0..num_datasets {
        for (k, measure) in result.measures.iter().enumerate() {
            let values: Vec<f64> = (0..num_methods)
                .map(|m| {
                    result.cells[d][m][k].ok_or_else(|| {
                        Error::Bench("rank aggregation needs an imputed result".into())
                    })
                })
                .collect::<Result<_>>()?;
            let oriented: Vec<f64> = match measure.direction() {
                Direction::Minimize => values,
                Direction::Maximize => values.iter().map(|v| -v).collect(),
            };
            for (m, rank) in ranks_with_ties(&oriented).into_iter().enumerate() {
                mean_ranks[k][m] += rank;
            }
        }
        let runtimes: Vec<f64> = (0..num_methods)
            .map(|m| {
                result.runtimes[d][m].ok_or_else(|| {
                    Error::Bench("rank aggregation needs an imputed result".into())
                })
            })
            .collect::<Result<_>>()?;
        for (m, rank) in ranks_with_ties(&runtimes).into_iter().enumerate() {
            mean_ranks[result.measures.len()][m] += rank;
        }
    }
    for row in &mut mean_ranks {
        for v in row.iter_mut() {
            *v /= num_datasets as f64;
        }
    }
    Ok(RankSummary {
        methods: result.methods.clone(),
        columns,
        mean_ranks,
    })
}

/// Competition ranks 1..n with ties averaged; smaller values rank better.
fn ranks_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
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

/// Means table: one row per method, one column per measure plus runtime,
/// averaged over datasets. Requires an imputed result.
pub fn write_means_csv<W: Write>(result: &BenchResult, w: &mut W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Bench(format!("write means: {e}"));
    let measure_names: Vec<&str> = result.measures.iter().map(|m| m.name()).collect();
    writeln!(w, "method,{},runtime", measure_names.join(",")).map_err(io_err)?;
    for m in 0..result.methods.len() {
        let mut fields = vec![result.methods[m].clone()];
        for k in 0..result.measures.len() {
            let mean = result
                .mean_over_datasets(m, k)
                .ok_or_else(|| Error::Bench("means table needs an imputed result".into()))?;
            fields.push(format!("{mean}"));
        }
        let runtime: Option<Vec<f64>> = result.runtimes.iter().map(|d| d[m]).collect();
        let runtime = runtime
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .ok_or_else(|| Error::Bench("means table needs an imputed result".into()))?;
        fields.push(format!("{runtime}"));
        writeln!(w, "{}", fields.join(",")).map_err(io_err)?;
    }
    Ok(())
}

/// Ranks table matching the means table layout.
pub fn write_ranks_csv<W: Write>(summary: &RankSummary, w: &mut W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Bench(format!("write ranks: {e}"));
    writeln!(w, "method,{}", summary.columns.join(",")).map_err(io_err)?;
    for (m, method) in summary.methods.iter().enumerate() {
        let mut fields = vec![method.clone()];
        for column in 0..summary.columns.len() {
            fields.push(format!("{}", summary.mean_ranks[column][m]));
        }
        writeln!(w, "{}", fields.join(",")).map_err(io_err)?;
    }
    Ok(())
}

/// Reproducibility manifest for a benchmark run.
pub fn write_manifest<W: Write>(
    w: &mut W,
    datasets: &[Dataset],
    methods: &[BenchMethod],
    measures: &[Measure],
    config: &BenchConfig,
) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Bench(format!("write manifest: {e}"));
    writeln!(w, "foresttune {}", env!("CARGO_PKG_VERSION")).map_err(io_err)?;
    writeln!(w, "seed {}", config.seed).map_err(io_err)?;
    writeln!(w, "folds {} reps {}", config.folds, config.reps).map_err(io_err)?;
    writeln!(w, "workers {}", config.workers).map_err(io_err)?;
    for ds in datasets {
        writeln!(w, "dataset {} n {} p {}", ds.name, ds.n(), ds.p()).map_err(io_err)?;
    }
    for method in methods {
        writeln!(w, "method {} {:?}", method.name(), method).map_err(io_err)?;
    }
    let names: Vec<&str> = measures.iter().map(|m| m.name()).collect();
    writeln!(w, "measures {}", names.join(",")).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_sparse_signal;

    fn fixture_result(
        fold_values: Vec<Vec<Vec<Option<Vec<f64>>>>>,
        measures: Vec<Measure>,
    ) -> BenchResult {
        let datasets = (0..fold_values.len())
            .map(|i| format!("ds{i}"))
            .collect::<Vec<_>>();
        let methods = (0..fold_values[0].len())
            .map(|i| format!("m{i}"))
            .collect::<Vec<_>>();
        let fold_runtimes: Vec<Vec<Vec<Option<f64>>>> = fold_values
            .iter()
            .map(|d| {
                d.iter()
                    .map(|m| {
                        m.iter()
                            .map(|v| v.as_ref().map(|_| 1.0))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BenchResult::from_parts(datasets, methods, measures, fold_values, fold_runtimes)
    }

    fn folds_of(values: &[Option<f64>]) -> Vec<Option<Vec<f64>>> {
        values.iter().map(|v| v.map(|x| vec![x])).collect()
    }

    #[test]
    fn low_failure_rate_keeps_mean_of_successes() {
        // 1 failed fold of 10: the cell is the mean of the 9 successes
        let mut folds = vec![Some(0.2); 9];
        folds.push(None);
        let result = fixture_result(
            vec![vec![folds_of(&folds), folds_of(&[Some(0.4); 10])]],
            vec![Measure::Mmce],
        );
        assert_eq!(result.failures[0][0], 0.1);
        let imputed = impute_failures(&result).unwrap();
        assert!((imputed.cells[0][0][0].unwrap() - 0.2).abs() < 1e-12);
        assert!((imputed.cells[0][1][0].unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn high_failure_rate_takes_worst_competitor() {
        // 3 failed of 10 (30 percent) -> worst competing value per measure
        let mut folds = vec![Some(0.1); 7];
        folds.extend([None, None, None]);
        let result = fixture_result(
            vec![vec![
                folds_of(&folds),
                folds_of(&[Some(0.4); 10]),
                folds_of(&[Some(0.3); 10]),
            ]],
            vec![Measure::Mmce],
        );
        assert!(result.failures[0][0] > FAILURE_THRESHOLD);
        let imputed = impute_failures(&result).unwrap();
        // worst (max, minimize-measure) among the other two methods
        assert!((imputed.cells[0][0][0].unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn maximize_measures_impute_with_the_minimum() {
        let mut folds = vec![Some(0.99); 5];
        folds.extend([None; 5]);
        let result = fixture_result(
            vec![vec![
                folds_of(&folds),
                folds_of(&[Some(0.8); 10]),
                folds_of(&[Some(0.9); 10]),
            ]],
            vec![Measure::Auc],
        );
        let imputed = impute_failures(&result).unwrap();
        assert!((imputed.cells[0][0][0].unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn no_failures_is_identity() {
        let result = fixture_result(
            vec![vec![folds_of(&[Some(0.2); 4]), folds_of(&[Some(0.3); 4])]],
            vec![Measure::Mmce],
        );
        let imputed = impute_failures(&result).unwrap();
        assert_eq!(imputed, result);
    }

    #[test]
    fn all_methods_failing_hard_is_an_error() {
        let result = fixture_result(
            vec![vec![folds_of(&[None; 4]), folds_of(&[None; 4])]],
            vec![Measure::Mmce],
        );
        assert!(matches!(
            impute_failures(&result),
            Err(Error::AllMethodsFailed(_))
        ));
    }

    #[test]
    fn rank_sums_are_m_times_m_plus_one_over_two() {
        let result = fixture_result(
            vec![
                vec![
                    folds_of(&[Some(0.1); 2]),
                    folds_of(&[Some(0.3); 2]),
                    folds_of(&[Some(0.2); 2]),
                ],
                vec![
                    folds_of(&[Some(0.5); 2]),
                    folds_of(&[Some(0.5); 2]),
                    folds_of(&[Some(0.6); 2]),
                ],
            ],
            vec![Measure::Mmce],
        );
        let summary = aggregate_ranks(&result).unwrap();
        let m = 3.0;
        for column in 0..summary.columns.len() {
            let sum: f64 = summary.mean_ranks[column].iter().sum();
            assert!((sum - m * (m + 1.0) / 2.0).abs() < 1e-12, "column {column}");
        }
        // dataset 2 ties methods 0 and 1 at rank 1.5 each
        assert_eq!(summary.mean_ranks[0][2], (2.0 + 3.0) / 2.0);
    }

    #[test]
    fn two_method_ranks_follow_ordering() {
        let result = fixture_result(
            vec![
                vec![folds_of(&[Some(0.1); 2]), folds_of(&[Some(0.2); 2])],
                vec![folds_of(&[Some(0.3); 2]), folds_of(&[Some(0.4); 2])],
            ],
            vec![Measure::Mmce],
        );
        let summary = aggregate_ranks(&result).unwrap();
        assert_eq!(summary.mean_ranks[0], vec![1.0, 2.0]);
    }

    #[test]
    fn benchmark_counts_evaluations_and_is_deterministic() {
        let ds = synth_sparse_signal(40, 2, 2, 1).unwrap();
        let methods = [BenchMethod::Default { num_trees: 15 }];
        let measures = [Measure::Mmce, Measure::BrierMulticlass];
        let config = BenchConfig {
            folds: 2,
            reps: 1,
            seed: 5,
            workers: 2,
        };
        let a = run_benchmark(&[ds.clone()], &methods, &measures, &config).unwrap();
        assert_eq!(a.fold_values[0][0].len(), 2);
        assert_eq!(a.failures[0][0], 0.0);
        let b = run_benchmark(&[ds], &methods, &measures, &config).unwrap();
        assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn failing_method_is_recorded_not_fatal() {
        // the caret grid needs p >= 2; a single-predictor dataset makes it
        // fail on every fold while the default succeeds
        let ds = synth_sparse_signal(30, 1, 0, 2).unwrap();
        let methods = [
            BenchMethod::Default { num_trees: 10 },
            BenchMethod::CaretGrid {
                num_trees: 10,
                bootstrap_iters: 2,
            },
        ];
        let measures = [Measure::Mmce];
        let config = BenchConfig {
            folds: 2,
            reps: 1,
            seed: 0,
            workers: 1,
        };
        let result = run_benchmark(&[ds], &methods, &measures, &config).unwrap();
        assert_eq!(result.failures[0][1], 1.0);
        assert_eq!(result.failures[0][0], 0.0);
        let imputed = impute_failures(&result).unwrap();
        assert_eq!(imputed.cells[0][1][0], imputed.cells[0][0][0]);
        // csv writers work on the imputed result
        let mut means = Vec::new();
        write_means_csv(&imputed, &mut means).unwrap();
        assert!(String::from_utf8(means).unwrap().starts_with("method,mmce,runtime"));
        let summary = aggregate_ranks(&imputed).unwrap();
        let mut ranks = Vec::new();
        write_ranks_csv(&summary, &mut ranks).unwrap();
        assert!(String::from_utf8(ranks).unwrap().contains("caret_grid"));
    }
}
