//! Sequential model-based optimization.
//!
//! A regression forest fitted on the evaluated design points serves as the
//! surrogate; its per-tree spread gives a predictive standard deviation, and
//! expected improvement over a random candidate batch proposes the next
//! point. Objectives are oriented so that smaller is always better; callers
//! negate maximize-measures at the boundary.

use std::io::Write;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::data::{Column, ColumnData, Dataset, Target};
use crate::error::{Error, Result};
use crate::forest::{Forest, HyperParams, SplitRule};
use crate::rng::{derive_seed, stream_rng};
use crate::space::{EncodedPoint, ParamSpace, ParamValue};

/// One evaluated configuration. `objective` is oriented (smaller is better).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub point: EncodedPoint,
    pub decoded: Vec<ParamValue>,
    pub objective: f64,
    pub iteration: usize,
    pub wall_time: f64,
    pub failed: bool,
}

/// Surrogate: a regression forest over (unit-cube coordinates -> objective)
/// retaining per-tree predictions for an uncertainty estimate.
pub struct SurrogateModel {
    forest: Forest,
}

/// Loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SmboConfig {
    /// Uniform random evaluations seeding the surrogate.
    pub warmup: usize,
    /// Guided fit-propose-evaluate cycles after warmup.
    pub iters: usize,
    /// Random candidates scored by expected improvement per proposal.
    pub candidates: usize,
    pub seed: u64,
}

impl SmboConfig {
    pub fn new(warmup: usize, iters: usize, seed: u64) -> SmboConfig {
        SmboConfig {
            warmup,
            iters,
            candidates: 1000,
            seed,
        }
    }
}

/// The full evaluation history of one run, in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SmboHistory {
    pub points: Vec<DesignPoint>,
    pub space: ParamSpace,
    pub config: SmboConfig,
    pub failed_evaluations: usize,
}

impl SmboHistory {
    /// Index of the best (smallest oriented objective) point; earlier wins
    /// ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, point) in self.points.iter().enumerate() {
            if point.objective < self.points[best].objective {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> &DesignPoint {
        &self.points[self.best_index()]
    }

    /// CSV export: iteration, decoded parameters, objective, running best,
    /// wall time, failure flag.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Smbo(format!("write history: {e}"));
        let names: Vec<&str> = self.space.specs.iter().map(|s| s.name.as_str()).collect();
        writeln!(
            w,
            "iteration,{},objective,cumulative_best,wall_time,failed",
            names.join(",")
        )
        .map_err(io_err)?;
        let mut best = f64::INFINITY;
        for point in &self.points {
            best = best.min(point.objective);
            let decoded: Vec<String> = point.decoded.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                point.iteration,
                decoded.join(","),
                point.objective,
                best,
                point.wall_time,
                u8::from(point.failed)
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

/// Internal settings of the surrogate forest. The surrogate family is a
/// regression forest; these values keep it cheap and deterministic on
/// designs of around a hundred points.
fn surrogate_params(dimension: usize) -> HyperParams {
    HyperParams {
        mtry: dimension.max(1),
        sample_fraction: 1.0,
        replace: true,
        min_node_size: 3,
        num_trees: 100,
        split_rule: SplitRule::WeightedVariance,
        max_depth: None,
    }
}

/// Fit the surrogate on all evaluated design points.
pub fn fit_surrogate(design: &[DesignPoint], seed: u64) -> Result<SurrogateModel> {
    if design.len() < 2 {
        return Err(Error::TooFewDesignPoints(design.len()));
    }
    if design.iter().any(|d| !d.objective.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let dimension = design[0].point.0.len();
    let columns: Vec<Column> = (0..dimension)
        .map(|d| Column {
            name: format!("x{d}"),
            data: ColumnData::Numeric(design.iter().map(|pt| pt.point.0[d]).collect()),
        })
        .collect();
    let ds = Dataset::new(
        "surrogate-design",
        columns,
        "objective",
        Target::Regression(design.iter().map(|pt| pt.objective).collect()),
    )?;
    let params = surrogate_params(dimension);
    let forest = Forest::train(&ds, &params, seed, 1)?;
    Ok(SurrogateModel { forest })
}

impl SurrogateModel {
    pub fn dimension(&self) -> usize {
        self.forest.features.len()
    }

    /// Mean and sample standard deviation of the per-tree predictions.
    pub fn mean_sd(&self, point: &EncodedPoint) -> (f64, f64) {
        assert_eq!(point.0.len(), self.dimension(), "surrogate dimension");
        let values = self.forest.per_tree_values(&|f| point.0[f]);
        let t = values.len() as f64;
        let mean = values.iter().sum::<f64>() / t;
        if values.len() < 2 {
            return (mean, 0.0);
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0);
        (mean, var.sqrt())
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

/// Abramowitz-Stegun 7.1.26 rational approximation, absolute error < 1.5e-7.
fn erf(x: f64) -> f64 {
    const A1: f64 = 0.254829592;
    const A2: f64 = -0.284496736;
    const A3: f64 = 1.421413741;
    const A4: f64 = -1.453152027;
    const A5: f64 = 1.061405429;
    const P: f64 = 0.3275911;

    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let y = 1.0 - ((((A5 * t + A4) * t + A3) * t + A2) * t + A1) * t * (-x * x).exp();
    sign * y
}

/// Expected improvement of a candidate with predictive (mean, sd) over the
/// incumbent best (oriented minimization). With sd = 0 this degenerates to
/// max(best - mean, 0); the result is clamped at 0 against approximation
/// noise in the normal CDF.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    if sd <= 0.0 {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sd;
    let ei = (best - mean) * normal_cdf(z) + sd * normal_pdf(z);
    ei.max(0.0)
}

/// The sample spread of bootstrap trees overstates the surrogate's
/// predictive uncertainty (it mixes resampling noise into the signal), which
/// starves the search of exploitation. Proposals therefore score expected
/// improvement on a tempered sd.
pub const PROPOSAL_SD_SCALE: f64 = 0.4;

/// Draw `candidates` uniform points and return the expected-improvement
/// argmax (EI on the tempered sd, see [`PROPOSAL_SD_SCALE`]); ties fall to
/// the lower surrogate mean, then to draw order.
pub fn propose(
    model: &SurrogateModel,
    best_so_far: f64,
    candidates: usize,
    rng: &mut ChaCha8Rng,
) -> EncodedPoint {
    assert!(candidates >= 1, "need at least one candidate");
    use rand::Rng;
    let dimension = model.dimension();
    let mut best_point: Option<(EncodedPoint, f64, f64)> = None;
    for _ in 0..candidates {
        let point = EncodedPoint((0..dimension).map(|_| rng.gen::<f64>()).collect());
        let (mean, sd) = model.mean_sd(&point);
        let ei = expected_improvement(mean, sd * PROPOSAL_SD_SCALE, best_so_far);
        let better = match &best_point {
            None => true,
            Some((_, best_ei, best_mean)) => {
                ei > *best_ei || (ei == *best_ei && mean < *best_mean)
            }
        };
        if better {
            best_point = Some((point, ei, mean));
        }
    }
    best_point.expect("at least one candidate").0
}

/// Run the full loop: `warmup` uniform evaluations, then `iters` cycles of
/// fit-propose-evaluate. The objective receives the evaluation index and the
/// encoded point and returns an oriented value, or `None` on failure; failed
/// evaluations are recorded with the worst objective observed so far and the
/// loop continues. Fails outright when every warmup evaluation fails.
pub fn run_smbo(
    space: &ParamSpace,
    config: &SmboConfig,
    mut objective: impl FnMut(usize, &EncodedPoint) -> Option<f64>,
    mut log: Option<&mut dyn Write>,
) -> Result<SmboHistory> {
    if config.warmup < 2 {
        return Err(Error::Smbo("warmup must be at least 2".into()));
    }
    if config.candidates < 1 {
        return Err(Error::Smbo("candidates must be at least 1".into()));
    }

    let mut rng = stream_rng(config.seed, 0);
    let mut points: Vec<DesignPoint> = Vec::with_capacity(config.warmup + config.iters);
    let mut failed_evaluations = 0usize;

    // Warmup: evaluate first, then impute failures with the worst success.
    let warmup_points = space.sample_uniform(config.warmup, &mut rng);
    let mut warmup_outcomes = Vec::with_capacity(config.warmup);
    for (iteration, point) in warmup_points.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = objective(iteration, &point).filter(|v| v.is_finite());
        let wall_time = started.elapsed().as_secs_f64();
        warmup_outcomes.push((point, outcome, wall_time));
    }
    let worst_success = warmup_outcomes
        .iter()
        .filter_map(|(_, outcome, _)| *outcome)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst_success == f64::NEG_INFINITY {
        return Err(Error::AllEvaluationsFailed);
    }
    let mut worst = worst_success;
    for (iteration, (point, outcome, wall_time)) in warmup_outcomes.into_iter().enumerate() {
        let failed = outcome.is_none();
        if failed {
            failed_evaluations += 1;
        }
        let design_point = DesignPoint {
            decoded: space.decode(&point)?,
            point,
            objective: outcome.unwrap_or(worst_success),
            iteration,
            wall_time,
            failed,
        };
        log_point(&mut log, space, &design_point, &points);
        points.push(design_point);
    }

    for step in 0..config.iters {
        let iteration = config.warmup + step;
        let surrogate = fit_surrogate(&points, derive_seed(config.seed, 1 + step as u64))?;
        let incumbent = points
            .iter()
            .map(|p| p.objective)
            .fold(f64::INFINITY, f64::min);
        let point = propose(&surrogate, incumbent, config.candidates, &mut rng);

        let started = Instant::now();
        let outcome = objective(iteration, &point).filter(|v| v.is_finite());
        let wall_time = started.elapsed().as_secs_f64();
        let failed = outcome.is_none();
        if failed {
            failed_evaluations += 1;
        }
        let objective_value = outcome.unwrap_or(worst);
        worst = worst.max(objective_value);
        let design_point = DesignPoint {
            decoded: space.decode(&point)?,
            point,
            objective: objective_value,
            iteration,
            wall_time,
            failed,
        };
        log_point(&mut log, space, &design_point, &points);
        points.push(design_point);
    }

    Ok(SmboHistory {
        points,
        space: space.clone(),
        config: config.clone(),
        failed_evaluations,
    })
}

fn log_point(
    log: &mut Option<&mut dyn Write>,
    space: &ParamSpace,
    point: &DesignPoint,
    so_far: &[DesignPoint],
) {
    if let Some(w) = log {
        let best = so_far
            .iter()
            .map(|p| p.objective)
            .fold(point.objective, f64::min);
        let params: Vec<String> = space
            .specs
            .iter()
            .zip(&point.decoded)
            .map(|(spec, value)| format!("{}={}", spec.name, value))
            .collect();
        let _ = writeln!(
            w,
            "eval {} {} objective={} best={}{}",
            point.iteration,
            params.join(" "),
            point.objective,
            best,
            if point.failed { " (failed, imputed)" } else { "" }
        );
    }
}
