//! Tuning front-ends: the SMBO tuner with out-of-bag objectives, the
//! best-5-percent recommendation rule, a runtime estimator, and three
//! baselines (mtry walk, three-point grid with bootstrap scoring, random
//! search).

use std::io::Write;
use std::time::Instant;

use crate::data::{Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{Forest, HyperParams, Predictions};
use crate::metrics::{evaluate, EvalInput, Measure};
use crate::oob::oob_measure;
use crate::rng::{derive_seed, stream_rng};
use crate::smbo::{run_smbo, SmboConfig, SmboHistory};
use crate::space::{
    min_node_size_spec, mtry_spec, replace_spec, sample_fraction_spec, ParamKind, ParamSpace,
    ParamValue,
};

/// Seed stream offset for objective forest trainings, clear of the streams
/// the SMBO loop itself uses.
const OBJECTIVE_STREAM: u64 = 1 << 20;

/// Parameters the tuner may search over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunedParam {
    Mtry,
    SampleFraction,
    MinNodeSize,
    Replace,
}

impl TunedParam {
    pub fn name(self) -> &'static str {
        match self {
            TunedParam::Mtry => "mtry",
            TunedParam::SampleFraction => "sample_fraction",
            TunedParam::MinNodeSize => "min_node_size",
            TunedParam::Replace => "replace",
        }
    }

    pub fn parse(name: &str) -> Option<TunedParam> {
        match name {
            "mtry" => Some(TunedParam::Mtry),
            "sample_fraction" => Some(TunedParam::SampleFraction),
            "min_node_size" => Some(TunedParam::MinNodeSize),
            "replace" => Some(TunedParam::Replace),
            _ => None,
        }
    }
}

impl std::fmt::Display for TunedParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Default tuned set: mtry, sample fraction and node size together.
pub const DEFAULT_TUNED: [TunedParam; 3] = [
    TunedParam::Mtry,
    TunedParam::SampleFraction,
    TunedParam::MinNodeSize,
];

/// Tuner configuration. Defaults: 2000 trees per evaluated forest, 30
/// warmup evaluations plus 70 guided steps, the three-parameter space,
/// 1000 proposal candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub measure: Measure,
    pub num_trees: usize,
    pub warmup: usize,
    pub iters: usize,
    pub tuned: Vec<TunedParam>,
    pub candidates: usize,
    pub workers: usize,
    pub seed: u64,
}

impl TuneConfig {
    pub fn new(measure: Measure) -> TuneConfig {
        TuneConfig {
            measure,
            num_trees: 2000,
            warmup: 30,
            iters: 70,
            tuned: DEFAULT_TUNED.to_vec(),
            candidates: 1000,
            workers: 1,
            seed: 0,
        }
    }

    /// Tuned parameters in canonical order, deduplicated.
    fn normalized_tuned(&self) -> Vec<TunedParam> {
        let mut ordered = Vec::new();
        for param in [
            TunedParam::Mtry,
            TunedParam::SampleFraction,
            TunedParam::MinNodeSize,
            TunedParam::Replace,
        ] {
            if self.tuned.contains(&param) {
                ordered.push(param);
            }
        }
        ordered
    }
}

/// Everything a tuning run produces: the recommendation, the SMBO history,
/// the final model trained with the recommendation, its out-of-bag measure
/// value (natural orientation) and the total wall time in seconds.
#[derive(Debug)]
pub struct TuneResult {
    pub recommended: HyperParams,
    pub history: SmboHistory,
    pub model: Forest,
    pub objective: f64,
    pub total_time: f64,
}

/// Search space for a tuned-parameter subset.
pub fn build_space(tuned: &[TunedParam], n: usize, p: usize) -> Result<ParamSpace> {
    if tuned.is_empty() {
        return Err(Error::Tuner("nothing to tune".into()));
    }
    let mut specs = Vec::with_capacity(tuned.len());
    for param in tuned {
        specs.push(match param {
            TunedParam::Mtry => mtry_spec(p)?,
            TunedParam::SampleFraction => sample_fraction_spec()?,
            TunedParam::MinNodeSize => {
                if n < 5 {
                    return Err(Error::Tuner(format!(
                        "node-size transform needs at least 5 observations, got {n}"
                    )));
                }
                min_node_size_spec(n)?
            }
            TunedParam::Replace => replace_spec()?,
        });
    }
    ParamSpace::new(specs)
}

/// Base configuration for tuning-time forests: task defaults, except that
/// sampling switches to without-replacement when the sample fraction is
/// tuned (and `replace` itself is not), so bags stay proper subsamples.
fn tuning_base(task: TaskKind, p: usize, num_trees: usize, tuned: &[TunedParam]) -> HyperParams {
    let mut base = HyperParams::defaults(task, p);
    base.num_trees = num_trees;
    if tuned.contains(&TunedParam::SampleFraction) && !tuned.contains(&TunedParam::Replace) {
        base.replace = false;
    }
    base
}

/// Overlay decoded values (aligned with the tuned-parameter order) onto a
/// base configuration.
fn apply_values(base: &HyperParams, tuned: &[TunedParam], values: &[ParamValue]) -> HyperParams {
    let mut params = base.clone();
    for (param, value) in tuned.iter().zip(values) {
        match (param, value) {
            (TunedParam::Mtry, ParamValue::Int(v)) => params.mtry = *v as usize,
            (TunedParam::SampleFraction, ParamValue::Float(v)) => params.sample_fraction = *v,
            (TunedParam::MinNodeSize, ParamValue::Int(v)) => params.min_node_size = *v as usize,
            (TunedParam::Replace, ParamValue::Bool(v)) => params.replace = *v,
            _ => unreachable!("space construction fixes the value kinds"),
        }
    }
    params
}

/// Tune with SMBO over the configured space: every objective evaluation
/// trains a forest with the decoded parameters and scores it by the
/// out-of-bag measure; maximize-measures are negated inside the loop.
/// Failed evaluations are imputed by the loop and the search continues.
pub fn tune(ds: &Dataset, config: &TuneConfig) -> Result<TuneResult> {
    tune_with_log(ds, config, None)
}

/// As [`tune`], with an optional per-evaluation log sink.
pub fn tune_with_log(
    ds: &Dataset,
    config: &TuneConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TuneResult> {
    let started = Instant::now();
    config
        .measure
        .check_task(ds.task(), ds.num_classes())?;
    let tuned = config.normalized_tuned();
    let space = build_space(&tuned, ds.n(), ds.p())?;
    let base = tuning_base(ds.task(), ds.p(), config.num_trees, &tuned);
    if let Some(w) = log.as_deref_mut() {
        let _ = writeln!(w, "tuning space:\n{space}");
    }

    let smbo_config = SmboConfig {
        warmup: config.warmup,
        iters: config.iters,
        candidates: config.candidates,
        seed: config.seed,
    };
    let measure = config.measure;
    let history = run_smbo(
        &space,
        &smbo_config,
        |iteration, point| {
            let values = space.decode(point).ok()?;
            let params = apply_values(&base, &tuned, &values);
            let forest_seed = derive_seed(config.seed, OBJECTIVE_STREAM + iteration as u64);
            let forest = Forest::train(ds, &params, forest_seed, config.workers).ok()?;
            let value = oob_measure(&forest, ds, measure).ok()?;
            Some(measure.orient(value))
        },
        log,
    )?;

    let recommended = recommend(&history, &base, &tuned)?;
    let model = Forest::train(ds, &recommended, config.seed, config.workers)?;
    let objective = oob_measure(&model, ds, measure)?;
    Ok(TuneResult {
        recommended,
        history,
        model,
        objective,
        total_time: started.elapsed().as_secs_f64(),
    })
}

/// The recommendation rule: take the best 5 percent of all evaluations
/// (at least one), average each tuned parameter over them, round integer
/// parameters half-up, and clamp into the space bounds.
pub fn recommend(
    history: &SmboHistory,
    base: &HyperParams,
    tuned: &[TunedParam],
) -> Result<HyperParams> {
    if history.points.is_empty() {
        return Err(Error::Tuner("empty tuning history".into()));
    }
    if history.space.dimension() != tuned.len() {
        return Err(Error::Tuner(
            "history space does not match the tuned parameter list".into(),
        ));
    }
    let keep = ((history.points.len() as f64) * 0.05).ceil() as usize;
    let keep = keep.max(1);
    let mut order: Vec<usize> = (0..history.points.len()).collect();
    order.sort_by(|&a, &b| {
        history.points[a]
            .objective
            .total_cmp(&history.points[b].objective)
            .then(a.cmp(&b))
    });
    let best = &order[..keep];

    let values: Vec<ParamValue> = history
        .space
        .specs
        .iter()
        .enumerate()
        .map(|(d, spec)| {
            let mean = best
                .iter()
                .map(|&i| history.points[i].decoded[d].as_f64())
                .sum::<f64>()
                / keep as f64;
            average_to_value(&spec.kind, mean)
        })
        .collect();
    Ok(apply_values(base, tuned, &values))
}

/// Turn an averaged raw value back into a parameter value: integers round
/// half-up and clamp, reals clamp, booleans take the majority.
fn average_to_value(kind: &ParamKind, mean: f64) -> ParamValue {
    match kind {
        ParamKind::IntegerRange { lo, hi } | ParamKind::PowerInteger { lo, hi, .. } => {
            let v = (mean + 0.5).floor() as i64;
            ParamValue::Int(v.clamp(*lo, *hi))
        }
        ParamKind::ContinuousRange { lo, hi } => ParamValue::Float(mean.clamp(*lo, *hi)),
        ParamKind::Boolean => ParamValue::Bool(mean >= 0.5),
    }
}

/// Tuning-time estimate: train one default-parameter forest, multiply its
/// wall time by the number of planned evaluations and add 50 seconds for
/// surrogate overhead.
pub fn estimate_time(ds: &Dataset, config: &TuneConfig) -> Result<TimeEstimate> {
    let mut params = HyperParams::defaults(ds.task(), ds.p());
    params.num_trees = config.num_trees;
    let started = Instant::now();
    Forest::train(ds, &params, config.seed, config.workers)?;
    let per_training = started.elapsed().as_secs_f64();
    Ok(TimeEstimate {
        per_training,
        seconds: estimate_from(per_training, config.warmup + config.iters),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEstimate {
    /// Wall time of the single probe training, seconds.
    pub per_training: f64,
    /// Estimated total tuning time, seconds.
    pub seconds: f64,
}

/// The estimate formula alone: `train_seconds * evaluations + 50`.
pub fn estimate_from(train_seconds: f64, evaluations: usize) -> f64 {
    train_seconds * evaluations as f64 + 50.0
}

/// Render a duration as minutes and seconds, e.g. `1M 13S`.
pub fn format_duration(seconds: f64) -> String {
    let total = seconds.max(0.0).floor() as u64;
    format!("{}M {}S", total / 60, total % 60)
}

/// Result of the mtry walk: the chosen configuration plus every evaluated
/// (mtry, OOB error) pair in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct MtryWalkResult {
    pub params: HyperParams,
    pub evaluations: Vec<(usize, f64)>,
}

/// Coordinate walk on mtry: starting from the task default, divide by
/// `step_factor` (floor, at least 1) while the relative improvement in OOB
/// error stays at or above `improve`, then multiply from the default
/// (ceil, at most p) the same way; the best evaluated mtry wins, ties to
/// the earliest evaluation.
pub fn tune_mtry_walk(
    ds: &Dataset,
    step_factor: f64,
    improve: f64,
    num_trees: usize,
    seed: u64,
    workers: usize,
) -> Result<MtryWalkResult> {
    if step_factor <= 1.0 {
        return Err(Error::Tuner("step factor must exceed 1".into()));
    }
    let p = ds.p();
    let mut base = HyperParams::defaults(ds.task(), p);
    base.num_trees = num_trees;
    let error_measure = Measure::default_importance(ds.task());

    let mut evaluations: Vec<(usize, f64)> = Vec::new();
    let evaluate_mtry = |mtry: usize, evaluations: &mut Vec<(usize, f64)>| -> Result<f64> {
        let mut params = base.clone();
        params.mtry = mtry;
        let forest_seed = derive_seed(seed, evaluations.len() as u64);
        let forest = Forest::train(ds, &params, forest_seed, workers)?;
        let error = oob_measure(&forest, ds, error_measure)?;
        evaluations.push((mtry, error));
        Ok(error)
    };

    let default_mtry = base.mtry;
    let default_error = evaluate_mtry(default_mtry, &mut evaluations)?;

    for downward in [true, false] {
        let mut current = default_mtry;
        let mut current_error = default_error;
        loop {
            let next = if downward {
                ((current as f64 / step_factor).floor() as usize).max(1)
            } else {
                ((current as f64 * step_factor).ceil() as usize).min(p)
            };
            if next == current {
                break;
            }
            let error = evaluate_mtry(next, &mut evaluations)?;
            let relative = if current_error > 0.0 {
                (current_error - error) / current_error
            } else {
                f64::NEG_INFINITY
            };
            if relative >= improve {
                current = next;
                current_error = error;
            } else {
                break;
            }
        }
    }

    let (best_mtry, _) = evaluations
        .iter()
        .copied()
        .reduce(|best, candidate| if candidate.1 < best.1 { candidate } else { best })
        .expect("at least the default was evaluated");
    let mut params = base;
    params.mtry = best_mtry;
    Ok(MtryWalkResult {
        params,
        evaluations,
    })
}

/// Result of the three-point grid: the chosen configuration plus the mean
/// bootstrap-holdout score per candidate mtry.
#[derive(Debug, Clone, PartialEq)]
pub struct CaretGridResult {
    pub params: HyperParams,
    pub candidate_scores: Vec<(usize, f64)>,
}

/// Three-point mtry grid (1, the midpoint, p) scored by mean holdout error
/// over bootstrap resamples: each iteration trains on a bootstrap sample
/// and scores on the out-of-sample rows (error rate for classification,
/// squared error for regression). Ties go to the smaller mtry.
pub fn tune_grid_caret(
    ds: &Dataset,
    bootstrap_iters: usize,
    num_trees: usize,
    seed: u64,
    workers: usize,
) -> Result<CaretGridResult> {
    let p = ds.p();
    if p < 2 {
        return Err(Error::Tuner(
            "the three-point mtry grid needs at least 2 predictors".into(),
        ));
    }
    if bootstrap_iters == 0 {
        return Err(Error::Tuner("bootstrap iterations must be at least 1".into()));
    }
    let mut candidates = vec![1usize, ((1 + p) as f64 / 2.0 + 0.5).floor() as usize, p];
    candidates.sort_unstable();
    candidates.dedup();

    let mut base = HyperParams::defaults(ds.task(), p);
    base.num_trees = num_trees;
    let n = ds.n();

    let mut totals = vec![0.0f64; candidates.len()];
    let mut scored_iters = 0usize;
    for b in 0..bootstrap_iters {
        let mut rng = stream_rng(seed, b as u64);
        let bag = crate::forest::draw_bag(n, 1.0, true, &mut rng)?;
        let mut in_bag = vec![false; n];
        for &i in &bag {
            in_bag[i as usize] = true;
        }
        let holdout: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
        if holdout.is_empty() {
            continue;
        }
        let bag_rows: Vec<usize> = bag.iter().map(|&i| i as usize).collect();
        let train_ds = ds.subset(&bag_rows)?;
        let test_ds = ds.subset(&holdout)?;

        for (ci, &mtry) in candidates.iter().enumerate() {
            let mut params = base.clone();
            params.mtry = mtry;
            let forest_seed = derive_seed(
                seed,
                OBJECTIVE_STREAM + (b * candidates.len() + ci) as u64,
            );
            let forest = Forest::train(&train_ds, &params, forest_seed, workers)?;
            totals[ci] += holdout_error(&forest, &test_ds)?;
        }
        scored_iters += 1;
    }
    if scored_iters == 0 {
        return Err(Error::Tuner("every bootstrap iteration had an empty holdout".into()));
    }

    let candidate_scores: Vec<(usize, f64)> = candidates
        .iter()
        .zip(&totals)
        .map(|(&c, &t)| (c, t / scored_iters as f64))
        .collect();
    let (best_mtry, _) = candidate_scores
        .iter()
        .copied()
        .reduce(|best, candidate| if candidate.1 < best.1 { candidate } else { best })
        .expect("candidates are non-empty");
    let mut params = base;
    params.mtry = best_mtry;
    Ok(CaretGridResult {
        params,
        candidate_scores,
    })
}

fn holdout_error(forest: &Forest, test: &Dataset) -> Result<f64> {
    match forest.predict(test)? {
        Predictions::Classes(labels) => {
            let truth = test
                .class_codes()
                .ok_or_else(|| Error::TaskMismatch("classification dataset expected".into()))?;
            crate::metrics::mmce(truth, &labels)
        }
        Predictions::Values(values) => {
            let truth = test
                .regression_values()
                .ok_or_else(|| Error::TaskMismatch("regression dataset expected".into()))?;
            crate::metrics::mse(truth, &values)
        }
    }
}

/// Result of random search: the winning configuration and every evaluated
/// (parameters, oriented objective) pair.
#[derive(Debug, Clone)]
pub struct RandomSearchResult {
    pub params: HyperParams,
    pub evaluations: Vec<(HyperParams, f64)>,
}

/// Uniform random search over the default three-parameter space, each point
/// scored by the out-of-bag measure; the oriented best wins, ties to the
/// earliest draw.
pub fn tune_random(
    ds: &Dataset,
    points: usize,
    measure: Measure,
    num_trees: usize,
    seed: u64,
    workers: usize,
) -> Result<RandomSearchResult> {
    if points == 0 {
        return Err(Error::Tuner("random search needs at least 1 point".into()));
    }
    measure.check_task(ds.task(), ds.num_classes())?;
    let tuned = DEFAULT_TUNED.to_vec();
    let space = build_space(&tuned, ds.n(), ds.p())?;
    let base = tuning_base(ds.task(), ds.p(), num_trees, &tuned);

    let mut rng = stream_rng(seed, 0);
    let sampled = space.sample_uniform(points, &mut rng);
    let mut evaluations = Vec::with_capacity(points);
    for (i, point) in sampled.iter().enumerate() {
        let values = space.decode(point)?;
        let params = apply_values(&base, &tuned, &values);
        let forest_seed = derive_seed(seed, OBJECTIVE_STREAM + i as u64);
        let forest = Forest::train(ds, &params, forest_seed, workers)?;
        let value = measure.orient(oob_measure(&forest, ds, measure)?);
        evaluations.push((params, value));
    }
    let best = evaluations
        .iter()
        .cloned()
        .reduce(|best, candidate| if candidate.1 < best.1 { candidate } else { best })
        .expect("at least one point");
    Ok(RandomSearchResult {
        params: best.0,
        evaluations,
    })
}

/// Per-fold evaluation of `evaluate` over a trained forest and a test split,
/// shared by the benchmark harness.
pub(crate) fn test_measure(forest: &Forest, test: &Dataset, measure: Measure) -> Result<f64> {
    match &forest.task {
        crate::forest::TaskInfo::Classification { classes } => {
            let probs: Vec<Option<Vec<f64>>> = forest
                .predict_proba(test)?
                .into_iter()
                .map(Some)
                .collect();
            let truth = test
                .class_codes()
                .ok_or_else(|| Error::TaskMismatch("classification dataset expected".into()))?;
            Ok(evaluate(
                measure,
                &EvalInput::Probabilities {
                    truth,
                    probs: &probs,
                    num_classes: classes.len(),
                },
            )?
            .value)
        }
        crate::forest::TaskInfo::Regression => {
            let Predictions::Values(values) = forest.predict(test)? else {
                unreachable!("regression forest yields values")
            };
            let predicted: Vec<Option<f64>> = values.into_iter().map(Some).collect();
            let truth = test
                .regression_values()
                .ok_or_else(|| Error::TaskMismatch("regression dataset expected".into()))?;
            Ok(evaluate(
                measure,
                &EvalInput::Values {
                    truth,
                    predicted: &predicted,
                },
            )?
            .value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_monks2, synth_sparse_signal, Column, ColumnData, Dataset, Target};
    use crate::smbo::DesignPoint;
    use crate::space::EncodedPoint;

    #[test]
    fn duration_formatting() {
        assert_eq!(format_duration(73.0), "1M 13S");
        assert_eq!(format_duration(50.0), "0M 50S");
        assert_eq!(format_duration(150.4), "2M 30S");
        assert_eq!(format_duration(3605.0), "60M 5S");
    }

    #[test]
    fn estimate_formula_is_exact() {
        assert_eq!(estimate_from(1.0, 100), 150.0);
        assert_eq!(estimate_from(0.0, 100), 50.0);
        assert_eq!(estimate_from(0.25, 40), 60.0);
    }

    fn history_with(
        mtrys: &[i64],
        node_sizes: &[i64],
        fractions: &[f64],
        objectives: &[f64],
    ) -> SmboHistory {
        let space = build_space(&DEFAULT_TUNED, 500, 20).unwrap();
        let points = (0..mtrys.len())
            .map(|i| DesignPoint {
                point: EncodedPoint(vec![0.5, 0.5, 0.5]),
                decoded: vec![
                    ParamValue::Int(mtrys[i]),
                    ParamValue::Float(fractions[i]),
                    ParamValue::Int(node_sizes[i]),
                ],
                objective: objectives[i],
                iteration: i,
                wall_time: 0.0,
                failed: false,
            })
            .collect();
        SmboHistory {
            points,
            space,
            config: SmboConfig::new(2, 0, 0),
            failed_evaluations: 0,
        }
    }

    #[test]
    fn recommend_averages_best_five_percent_with_rounding() {
        // 100 points; the five best (objectives 0.0..0.04) carry mtry
        // {4,6,6,5,7} -> mean 5.6 -> 6; fractions average exactly.
        let mut mtrys = vec![15i64; 100];
        let mut node_sizes = vec![50i64; 100];
        let mut fractions = vec![0.5f64; 100];
        let mut objectives: Vec<f64> = (0..100).map(|i| 1.0 + i as f64).collect();
        let best_mtry = [4i64, 6, 6, 5, 7];
        let best_ns = [2i64, 2, 3, 3, 2];
        let best_sf = [0.3, 0.4, 0.5, 0.6, 0.7];
        for i in 0..5 {
            mtrys[20 + i] = best_mtry[i];
            node_sizes[20 + i] = best_ns[i];
            fractions[20 + i] = best_sf[i];
            objectives[20 + i] = 0.01 * i as f64;
        }
        let history = history_with(&mtrys, &node_sizes, &fractions, &objectives);
        let base = tuning_base(TaskKind::Classification, 20, 2000, &DEFAULT_TUNED);
        let params = recommend(&history, &base, &DEFAULT_TUNED).unwrap();
        assert_eq!(params.mtry, 6); // 5.6 rounds half-up
        assert_eq!(params.min_node_size, 2); // mean 2.4 rounds to 2
        assert!((params.sample_fraction - 0.5).abs() < 1e-12);
        assert!(!params.replace); // sample fraction tuned => subsampling
        assert_eq!(params.num_trees, 2000);
    }

    #[test]
    fn recommend_single_point_returns_that_point() {
        let history = history_with(&[9], &[7], &[0.71], &[0.3]);
        let base = tuning_base(TaskKind::Classification, 20, 100, &DEFAULT_TUNED);
        let params = recommend(&history, &base, &DEFAULT_TUNED).unwrap();
        assert_eq!(params.mtry, 9);
        assert_eq!(params.min_node_size, 7);
        assert!((params.sample_fraction - 0.71).abs() < 1e-12);
    }

    #[test]
    fn tuning_only_mtry_pins_other_params_to_defaults() {
        let ds = synth_sparse_signal(60, 3, 3, 5).unwrap();
        let mut config = TuneConfig::new(Measure::BrierMulticlass);
        config.num_trees = 30;
        config.warmup = 4;
        config.iters = 3;
        config.candidates = 50;
        config.tuned = vec![TunedParam::Mtry];
        config.workers = 2;
        config.seed = 7;
        let result = tune(&ds, &config).unwrap();
        // untuned parameters stay at the task defaults
        assert_eq!(result.recommended.sample_fraction, 1.0);
        assert_eq!(result.recommended.min_node_size, 1);
        assert!(result.recommended.replace, "full bootstrap keeps OOB rows");
        assert!(result.recommended.mtry >= 1 && result.recommended.mtry <= ds.p());
        assert_eq!(result.history.points.len(), 7);
    }

    #[test]
    fn tune_history_length_and_determinism() {
        let ds = synth_sparse_signal(80, 2, 4, 3).unwrap();
        let mut config = TuneConfig::new(Measure::BrierMulticlass);
        config.num_trees = 25;
        config.warmup = 3;
        config.iters = 4;
        config.candidates = 30;
        config.workers = 2;
        config.seed = 11;
        let a = tune(&ds, &config).unwrap();
        let b = tune(&ds, &config).unwrap();
        assert_eq!(a.history.points.len(), 7);
        assert_eq!(a.recommended, b.recommended);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.model, b.model);
        // recommendation lies inside the space bounds
        assert!((0.2..=0.9).contains(&a.recommended.sample_fraction));
        assert!(a.recommended.min_node_size >= 1 && a.recommended.min_node_size <= ds.n());
    }

    #[test]
    fn tune_rejects_incompatible_measure() {
        let ds = synth_sparse_signal(40, 2, 2, 0).unwrap();
        let config = TuneConfig::new(Measure::Mse);
        assert!(matches!(
            tune(&ds, &config),
            Err(Error::IncompatibleMeasure { .. })
        ));
    }

    #[test]
    fn mtry_walk_candidate_sequence_and_bounds() {
        // flat OOB error cannot improve by 5 percent, so the default wins
        let ds = synth_monks2(3);
        let result = tune_mtry_walk(&ds, 2.0, 0.05, 40, 5, 2).unwrap();
        let p = ds.p();
        let evaluated: Vec<usize> = result.evaluations.iter().map(|&(m, _)| m).collect();
        assert_eq!(evaluated[0], 2); // the default for p = 6
        assert!(evaluated.iter().all(|&m| (1..=p).contains(&m)));
        let bound = 2 * (p as f64).log2().ceil() as usize + 1;
        assert!(result.evaluations.len() <= bound);
        // walking down halves with floor: from 2 the only candidate is 1
        assert!(evaluated.contains(&1) || evaluated.len() == 1);
    }

    #[test]
    fn mtry_walk_downward_candidates_halve_with_floor() {
        // p = 100 classification: default 10, downward 5, 2, 1
        let steps: Vec<usize> = {
            let mut out = vec![];
            let mut m = 10usize;
            loop {
                let next = ((m as f64 / 2.0).floor() as usize).max(1);
                if next == m {
                    break;
                }
                out.push(next);
                m = next;
                if m == 1 {
                    break;
                }
            }
            out
        };
        assert_eq!(steps, vec![5, 2, 1]);
    }

    #[test]
    fn mtry_walk_flat_error_keeps_default() {
        // constant feature values: every forest predicts the prior, so the
        // error never improves and the default mtry is returned
        let ds = Dataset::new(
            "flat",
            vec![
                Column {
                    name: "a".into(),
                    data: ColumnData::Numeric(vec![1.0; 30]),
                },
                Column {
                    name: "b".into(),
                    data: ColumnData::Numeric(vec![2.0; 30]),
                },
                Column {
                    name: "c".into(),
                    data: ColumnData::Numeric(vec![3.0; 30]),
                },
                Column {
                    name: "d".into(),
                    data: ColumnData::Numeric(vec![4.0; 30]),
                },
            ],
            "y",
            Target::Classification {
                classes: vec!["0".into(), "1".into()],
                codes: (0..30).map(|i| u32::from(i % 3 == 0)).collect(),
            },
        )
        .unwrap();
        let result = tune_mtry_walk(&ds, 2.0, 0.05, 20, 1, 1).unwrap();
        assert_eq!(result.params.mtry, 2); // default for p = 4
    }

    #[test]
    fn caret_grid_candidates() {
        let ds = synth_sparse_signal(40, 2, 3, 9).unwrap(); // p = 5
        let result = tune_grid_caret(&ds, 3, 20, 2, 2).unwrap();
        let candidates: Vec<usize> = result.candidate_scores.iter().map(|&(c, _)| c).collect();
        assert_eq!(candidates, vec![1, 3, 5]);

        // p = 2 deduplicates the midpoint
        let two = synth_sparse_signal(30, 1, 1, 4).unwrap();
        let result = tune_grid_caret(&two, 2, 10, 0, 1).unwrap();
        let candidates: Vec<usize> = result.candidate_scores.iter().map(|&(c, _)| c).collect();
        assert_eq!(candidates, vec![1, 2]);

        // p = 100: smallest, half-up midpoint, largest
        let wide = synth_sparse_signal(30, 2, 98, 6).unwrap();
        let result = tune_grid_caret(&wide, 1, 3, 1, 2).unwrap();
        let candidates: Vec<usize> = result.candidate_scores.iter().map(|&(c, _)| c).collect();
        assert_eq!(candidates, vec![1, 51, 100]);
    }

    #[test]
    fn tuning_monks2_with_brier_pushes_mtry_high() {
        let ds = synth_monks2(12);
        let mut config = TuneConfig::new(Measure::BrierMulticlass);
        config.num_trees = 100;
        config.warmup = 10;
        config.iters = 20;
        config.workers = 2;
        config.seed = 5;
        let result = tune(&ds, &config).unwrap();
        assert!(
            result.recommended.mtry >= 5,
            "recommended mtry {} below 5",
            result.recommended.mtry
        );
    }

    #[test]
    fn caret_grid_is_deterministic_and_respects_p_bound() {
        let ds = synth_sparse_signal(40, 2, 2, 1).unwrap();
        let a = tune_grid_caret(&ds, 4, 15, 3, 2).unwrap();
        let b = tune_grid_caret(&ds, 4, 15, 3, 2).unwrap();
        assert_eq!(a, b);

        let one = synth_sparse_signal(30, 1, 0, 0).unwrap();
        assert!(tune_grid_caret(&one, 2, 10, 0, 1).is_err());
    }

    #[test]
    fn decoded_points_always_validate() {
        // any unit-cube point decodes into parameters the forest accepts
        use crate::space::EncodedPoint;
        let (n, p) = (500usize, 20usize);
        let space = build_space(&DEFAULT_TUNED, n, p).unwrap();
        let base = tuning_base(TaskKind::Classification, p, 100, &DEFAULT_TUNED);
        let mut rng = stream_rng(77, 0);
        for point in space.sample_uniform(500, &mut rng) {
            let values = space.decode(&point).unwrap();
            let params = apply_values(&base, &DEFAULT_TUNED, &values);
            params
                .validate(TaskKind::Classification, n, p)
                .expect("decoded parameters are valid");
        }
        // the corners decode and validate too
        for corner in [vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]] {
            let values = space.decode(&EncodedPoint(corner)).unwrap();
            let params = apply_values(&base, &DEFAULT_TUNED, &values);
            params.validate(TaskKind::Classification, n, p).unwrap();
        }
    }

    #[test]
    fn random_search_best_is_oriented_minimum() {
        let ds = synth_sparse_signal(50, 2, 2, 8).unwrap();
        let result = tune_random(&ds, 4, Measure::BrierMulticlass, 20, 3, 2).unwrap();
        let best = result
            .evaluations
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min);
        let chosen = result
            .evaluations
            .iter()
            .find(|(p, _)| *p == result.params)
            .unwrap();
        assert_eq!(chosen.1, best);
        // single point returns that configuration
        let single = tune_random(&ds, 1, Measure::BrierMulticlass, 20, 3, 1).unwrap();
        assert_eq!(single.params, single.evaluations[0].0);
        // reruns reproduce
        let again = tune_random(&ds, 4, Measure::BrierMulticlass, 20, 3, 2).unwrap();
        assert_eq!(result.params, again.params);
    }
}
