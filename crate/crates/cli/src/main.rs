//! foresttune: train, inspect and tune random forests from the command
//! line.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error. All diagnostics
//! go to stderr; tabular outputs are CSV on stdout unless an output path is
//! given. Every run prints its resolved seed, and rerunning with that seed
//! reproduces the outputs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use foresttune_core::data::{
    load_csv, make_cv_plan, synth_monks2, synth_sparse_signal_with_shift, write_csv, Dataset,
    TaskKind, TypeHint, SPARSE_SIGNAL_SHIFT,
};
use foresttune_core::forest::{
    load_model, save_model, CellValue, Forest, HyperParams, Predictions, SplitRule, TaskInfo,
};
use foresttune_core::metrics::Measure;
use foresttune_core::oob::{importance_stability, oob_curve, permutation_importance};
use foresttune_core::tuner::{
    estimate_time, format_duration, tune_with_log, TuneConfig, TunedParam,
};
use foresttune_core::{bench, Error};

/// Seed fallback environment variable.
const SEED_ENV: &str = "FORESTTUNE_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "foresttune",
    version,
    about = "Random forests with out-of-bag, model-based hyperparameter tuning",
    arg_required_else_help = true
)]
struct Cli {
    /// Master seed (falls back to FORESTTUNE_SEED, then 42)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for tree growth (default: available cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest and save the model file
    Train(TrainArgs),
    /// Load a model and write predictions for a CSV of feature rows
    Predict(PredictArgs),
    /// Tune hyperparameters with out-of-bag SMBO and save the tuned model
    Tune(TuneArgs),
    /// Estimate tuning wall time from one probe training
    EstimateTime(EstimateTimeArgs),
    /// Out-of-bag measure values over a grid of tree counts
    OobCurve(OobCurveArgs),
    /// Permutation variable importance
    Importance(ImportanceArgs),
    /// Pairwise rank stability of importances across forests
    Stability(StabilityArgs),
    /// Emit synthetic fixture datasets
    Synth(SynthArgs),
    /// Repeated cross-validation benchmark of tuners against defaults
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,

    /// Target column name
    #[arg(long)]
    target: String,

    /// Columns to force categorical (comma separated)
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,

    /// Columns to force numeric (comma separated)
    #[arg(long, value_delimiter = ',')]
    numeric: Vec<String>,

    /// Treat the target as categorical even when it parses as numbers
    #[arg(long)]
    classify: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let mut overrides: HashMap<String, TypeHint> = HashMap::new();
        for name in &self.categorical {
            overrides.insert(name.clone(), TypeHint::Categorical);
        }
        for name in &self.numeric {
            overrides.insert(name.clone(), TypeHint::Numeric);
        }
        if self.classify {
            overrides.insert(self.target.clone(), TypeHint::Categorical);
        }
        load_csv(&self.data, &self.target, &overrides)
    }

    /// Load, and when a classification-only measure is requested on a target
    /// that parsed as numbers, reload with the target forced categorical (a
    /// probability measure states the intent unambiguously).
    fn load_for_measures(&self, measures: &[Measure]) -> Result<Dataset, Error> {
        let ds = self.load()?;
        let wants_classification = measures.iter().any(|m| *m != Measure::Mse);
        if wants_classification && ds.task() == TaskKind::Regression {
            eprintln!(
                "note: measure needs classes; treating target {:?} as categorical",
                self.target
            );
            let mut overrides: HashMap<String, TypeHint> = HashMap::new();
            for name in &self.categorical {
                overrides.insert(name.clone(), TypeHint::Categorical);
            }
            for name in &self.numeric {
                overrides.insert(name.clone(), TypeHint::Numeric);
            }
            overrides.insert(self.target.clone(), TypeHint::Categorical);
            return load_csv(&self.data, &self.target, &overrides);
        }
        Ok(ds)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitRuleArg {
    /// Exhaustive impurity scan (task default)
    Exhaustive,
    /// Randomized cutpoints (extremely randomized trees at 1 cut)
    Extra,
}

#[derive(Args)]
struct ParamArgs {
    /// Candidate features per split (default: sqrt(p) classification, p/3
    /// regression)
    #[arg(long)]
    mtry: Option<usize>,

    /// Fraction of rows drawn per tree (default 1.0)
    #[arg(long)]
    sample_fraction: Option<f64>,

    /// Draw rows with replacement (default true)
    #[arg(long)]
    replace: Option<bool>,

    /// Node-size floor below which nodes stay terminal (default 1
    /// classification, 5 regression)
    #[arg(long)]
    min_node_size: Option<usize>,

    /// Trees in the forest (default 500)
    #[arg(long)]
    num_trees: Option<usize>,

    /// Splitting rule (default: exhaustive Gini / variance scan)
    #[arg(long, value_enum)]
    split_rule: Option<SplitRuleArg>,

    /// Random cutpoints per candidate feature under --split-rule extra
    #[arg(long, default_value_t = 1)]
    num_random_cuts: usize,

    /// Cap on splits from root to leaf (default unlimited)
    #[arg(long)]
    max_depth: Option<usize>,
}

impl ParamArgs {
    fn resolve(&self, ds: &Dataset) -> HyperParams {
        let mut params = HyperParams::defaults(ds.task(), ds.p());
        if let Some(mtry) = self.mtry {
            params.mtry = mtry;
        }
        if let Some(fraction) = self.sample_fraction {
            params.sample_fraction = fraction;
        }
        if let Some(replace) = self.replace {
            params.replace = replace;
        }
        if let Some(size) = self.min_node_size {
            params.min_node_size = size;
        }
        if let Some(trees) = self.num_trees {
            params.num_trees = trees;
        }
        if let Some(SplitRuleArg::Extra) = self.split_rule {
            params.split_rule = SplitRule::ExtraRandom {
                num_random_cuts: self.num_random_cuts,
            };
        }
        params.max_depth = self.max_depth;
        params
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by train or tune
    #[arg(long)]
    model: PathBuf,
    /// CSV of feature rows (columns matched by name; extras ignored)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Objective measure (default: brier for classification, mse for
    /// regression)
    #[arg(long, value_parser = parse_measure)]
    measure: Option<Measure>,
    /// Trees per evaluated forest
    #[arg(long, default_value_t = 2000)]
    num_trees: usize,
    /// Random evaluations seeding the search
    #[arg(long, default_value_t = 30)]
    warmup: usize,
    /// Guided search steps after warmup
    #[arg(long, default_value_t = 70)]
    iters: usize,
    /// Parameters to tune (comma separated subset of
    /// mtry,sample_fraction,min_node_size,replace)
    #[arg(long, value_delimiter = ',', value_parser = parse_tuned_param,
          default_values_t = [TunedParam::Mtry, TunedParam::SampleFraction, TunedParam::MinNodeSize])]
    tune_params: Vec<TunedParam>,
    /// Proposal candidates per guided step
    #[arg(long, default_value_t = 1000)]
    candidates: usize,
    /// Write the tuned model here
    #[arg(long)]
    out_model: Option<PathBuf>,
    /// Write the evaluation history CSV here
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateTimeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 2000)]
    num_trees: usize,
    #[arg(long, default_value_t = 30)]
    warmup: usize,
    #[arg(long, default_value_t = 70)]
    iters: usize,
}

#[derive(Args)]
struct OobCurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Measures to track (default: brier,mmce or mse)
    #[arg(long, value_delimiter = ',', value_parser = parse_measure)]
    measures: Vec<Measure>,
    /// Tree counts to evaluate (default: a 1,2,5 ladder up to num_trees)
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Importance measure (default: mmce classification, mse regression)
    #[arg(long, value_parser = parse_measure)]
    measure: Option<Measure>,
    /// Permutation repetitions per tree
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Forests to compare pairwise
    #[arg(long, default_value_t = 5)]
    forests: usize,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    generator: SynthGenerator,
}

#[derive(Subcommand)]
enum SynthGenerator {
    /// Six categorical attributes; class 1 iff exactly two sit at level 2
    Monks2 {
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Class-shifted informative columns plus independent noise columns
    Sparse {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        informative: usize,
        #[arg(long, default_value_t = 480)]
        noise: usize,
        /// Class-mean separation of informative columns
        #[arg(long, default_value_t = SPARSE_SIGNAL_SHIFT)]
        shift: f64,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Default,
    Smbo,
    Walk,
    Caret,
    Random,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Datasets as path=target pairs (repeatable)
    #[arg(long = "dataset", required = true)]
    datasets: Vec<String>,
    /// Methods to compare
    #[arg(long, value_delimiter = ',', value_enum,
          default_values_t = [MethodArg::Default, MethodArg::Smbo])]
    methods: Vec<MethodArg>,
    /// Evaluation measures
    #[arg(long, value_delimiter = ',', value_parser = parse_measure)]
    measures: Vec<Measure>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Trees per trained forest
    #[arg(long, default_value_t = 500)]
    num_trees: usize,
    /// SMBO warmup evaluations inside each fold
    #[arg(long, default_value_t = 30)]
    warmup: usize,
    /// SMBO guided steps inside each fold
    #[arg(long, default_value_t = 70)]
    iters: usize,
    /// Random-search points inside each fold
    #[arg(long, default_value_t = 30)]
    points: usize,
    /// Directory for means.csv, ranks.csv and manifest.txt
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_measure(text: &str) -> Result<Measure, String> {
    Measure::parse_cli(text)
        .ok_or_else(|| format!("unknown measure {text:?} (mmce|auc|brier|logloss|mse)"))
}

fn parse_tuned_param(text: &str) -> Result<TunedParam, String> {
    TunedParam::parse(text).ok_or_else(|| {
        format!("unknown parameter {text:?} (mtry|sample_fraction|min_node_size|replace)")
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli
        .seed
        .or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or(DEFAULT_SEED);
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    eprintln!("seed: {seed}");

    match run(cli.command, seed, workers) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command, seed: u64, workers: usize) -> Result<(), Error> {
    match command {
        Command::Train(args) => cmd_train(args, seed, workers),
        Command::Predict(args) => cmd_predict(args),
        Command::Tune(args) => cmd_tune(args, seed, workers),
        Command::EstimateTime(args) => cmd_estimate_time(args, seed, workers),
        Command::OobCurve(args) => cmd_oob_curve(args, seed, workers),
        Command::Importance(args) => cmd_importance(args, seed, workers),
        Command::Stability(args) => cmd_stability(args, seed, workers),
        Command::Synth(args) => cmd_synth(args, seed),
        Command::Benchmark(args) => cmd_benchmark(args, seed, workers),
    }
}

/// Open `--out` or fall back to stdout.
fn output_writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|source| Error::FileWrite {
                path: path.clone(),
                source,
            })?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::FileWrite {
        path: path.to_path_buf(),
        source,
    }
}

fn save_to(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>,
) -> Result<(), Error> {
    let file = File::create(path).map_err(|source| io_error(path, source))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|source| io_error(path, source))
}

fn cmd_train(args: TrainArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = args.data.load()?;
    let params = args.params.resolve(&ds);
    let forest = Forest::train(&ds, &params, seed, workers)?;
    save_model(&forest, &args.out)?;
    eprintln!(
        "trained {} trees on {} rows x {} features ({:?})",
        params.num_trees,
        ds.n(),
        ds.p(),
        ds.task()
    );
    let oob = Measure::default_importance(ds.task());
    match foresttune_core::oob::oob_measure(&forest, &ds, oob) {
        Ok(value) => eprintln!("oob {}: {value}", oob.name()),
        Err(Error::NoOobObservations) => eprintln!("oob estimate unavailable (empty OOB sets)"),
        Err(e) => return Err(e),
    }
    eprintln!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let forest = load_model(&args.model)?;
    let rows = load_feature_rows(&args.data, &forest)?;
    let mut w = output_writer(&args.out)?;
    match (&forest.task, forest.predict_rows(&rows)?) {
        (TaskInfo::Classification { classes }, Predictions::Classes(labels)) => {
            let probs = forest.predict_proba_rows(&rows)?;
            let header: Vec<String> = std::iter::once("prediction".to_string())
                .chain(classes.iter().map(|c| format!("prob_{c}")))
                .collect();
            writeln!(w, "{}", header.join(",")).map_err(|e| io_stdout(e, &args.out))?;
            for (label, prob) in labels.iter().zip(&probs) {
                let fields: Vec<String> = std::iter::once(classes[*label as usize].clone())
                    .chain(prob.iter().map(|p| format!("{p}")))
                    .collect();
                writeln!(w, "{}", fields.join(",")).map_err(|e| io_stdout(e, &args.out))?;
            }
        }
        (TaskInfo::Regression, Predictions::Values(values)) => {
            writeln!(w, "prediction").map_err(|e| io_stdout(e, &args.out))?;
            for v in values {
                writeln!(w, "{v}").map_err(|e| io_stdout(e, &args.out))?;
            }
        }
        _ => unreachable!("prediction kind follows the task"),
    }
    w.flush().map_err(|e| io_stdout(e, &args.out))?;
    Ok(())
}

fn io_stdout(e: std::io::Error, out: &Option<PathBuf>) -> Error {
    match out {
        Some(path) => io_error(path, e),
        None => Error::Csv(format!("stdout: {e}")),
    }
}

/// Read feature rows for prediction, matching the model schema by column
/// name; extra columns (e.g. a target) are ignored.
fn load_feature_rows(path: &Path, forest: &Forest) -> Result<Vec<Vec<CellValue>>, Error> {
    let file = File::open(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let column_index: Vec<usize> = forest
        .features
        .iter()
        .map(|schema| {
            headers
                .iter()
                .position(|h| *h == schema.name)
                .ok_or_else(|| Error::SchemaMismatch(format!("missing column {:?}", schema.name)))
        })
        .collect::<Result<_, Error>>()?;

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let mut row = Vec::with_capacity(forest.features.len());
        for (schema, &c) in forest.features.iter().zip(&column_index) {
            let raw = record
                .get(c)
                .ok_or_else(|| Error::RaggedRow {
                    row: r + 1,
                    expected: headers.len(),
                    found: record.len(),
                })?
                .trim();
            if raw.is_empty() {
                return Err(Error::MissingValue {
                    row: r + 1,
                    column: schema.name.clone(),
                });
            }
            row.push(match schema.ty {
                foresttune_core::data::ColumnType::Numeric => CellValue::Numeric(
                    raw.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::SchemaMismatch(format!(
                                "column {:?} needs a number, got {raw:?} (row {})",
                                schema.name,
                                r + 1
                            ))
                        })?,
                ),
                foresttune_core::data::ColumnType::Categorical { .. } => {
                    CellValue::Categorical(raw.to_string())
                }
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_tune(args: TuneArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = match args.measure {
        Some(measure) => args.data.load_for_measures(&[measure])?,
        None => args.data.load()?,
    };
    let measure = args
        .measure
        .unwrap_or_else(|| Measure::default_for(ds.task()));
    let mut config = TuneConfig::new(measure);
    config.num_trees = args.num_trees;
    config.warmup = args.warmup;
    config.iters = args.iters;
    config.tuned = args.tune_params.clone();
    config.candidates = args.candidates;
    config.workers = workers;
    config.seed = seed;

    let mut log = std::io::stderr();
    let result = tune_with_log(&ds, &config, Some(&mut log))?;

    println!("Recommended parameter settings:");
    println!("  mtry             {}", result.recommended.mtry);
    println!("  min.node.size    {}", result.recommended.min_node_size);
    println!("  sample.fraction  {}", result.recommended.sample_fraction);
    if args.tune_params.contains(&TunedParam::Replace) {
        println!("  replace          {}", result.recommended.replace);
    }
    println!("Results:");
    println!("  {}  {}", measure.name(), result.objective);
    eprintln!(
        "tuning took {} ({} evaluations, {} failed)",
        format_duration(result.total_time),
        result.history.points.len(),
        result.history.failed_evaluations
    );

    if let Some(path) = &args.history {
        let file = File::create(path).map_err(|source| io_error(path, source))?;
        let mut w = BufWriter::new(file);
        result.history.write_csv(&mut w)?;
        w.flush().map_err(|source| io_error(path, source))?;
    }
    if let Some(path) = &args.out_model {
        save_model(&result.model, path)?;
        eprintln!("tuned model written to {}", path.display());
    }
    Ok(())
}

fn cmd_estimate_time(args: EstimateTimeArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = args.data.load()?;
    let mut config = TuneConfig::new(Measure::default_for(ds.task()));
    config.num_trees = args.num_trees;
    config.warmup = args.warmup;
    config.iters = args.iters;
    config.workers = workers;
    config.seed = seed;
    let estimate = estimate_time(&ds, &config)?;
    eprintln!(
        "one training took {:.3}s; {} evaluations planned",
        estimate.per_training,
        args.warmup + args.iters
    );
    println!("Estimated tuning time: {}", format_duration(estimate.seconds));
    Ok(())
}

fn default_curve_grid(num_trees: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut scale = 1usize;
    'outer: loop {
        for step in [1usize, 2, 5] {
            let value = step.saturating_mul(scale);
            if value >= num_trees {
                break 'outer;
            }
            grid.push(value);
        }
        scale = scale.saturating_mul(10);
    }
    grid.push(num_trees);
    grid
}

fn cmd_oob_curve(args: OobCurveArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = args.data.load_for_measures(&args.measures)?;
    let params = args.params.resolve(&ds);
    let measures = if args.measures.is_empty() {
        match ds.task() {
            TaskKind::Classification => vec![Measure::BrierMulticlass, Measure::Mmce],
            TaskKind::Regression => vec![Measure::Mse],
        }
    } else {
        args.measures.clone()
    };
    let grid = if args.grid.is_empty() {
        default_curve_grid(params.num_trees)
    } else {
        args.grid.clone()
    };
    let forest = Forest::train(&ds, &params, seed, workers)?;
    let curve = oob_curve(&forest, &ds, &measures, &grid)?;
    let mut w = output_writer(&args.out)?;
    writeln!(w, "ntree,measure,value").map_err(|e| io_stdout(e, &args.out))?;
    for (m, measure) in curve.measures.iter().enumerate() {
        for (i, &t) in curve.tree_counts.iter().enumerate() {
            writeln!(w, "{t},{},{}", measure.name(), curve.values[m][i])
                .map_err(|e| io_stdout(e, &args.out))?;
        }
    }
    w.flush().map_err(|e| io_stdout(e, &args.out))?;
    Ok(())
}

fn cmd_importance(args: ImportanceArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = args.data.load()?;
    let params = args.params.resolve(&ds);
    let measure = args
        .measure
        .unwrap_or_else(|| Measure::default_importance(ds.task()));
    let forest = Forest::train(&ds, &params, seed, workers)?;
    let report = permutation_importance(&forest, &ds, measure, args.reps, seed)?;
    let mut w = output_writer(&args.out)?;
    writeln!(w, "feature,importance,se").map_err(|e| io_stdout(e, &args.out))?;
    for feature in &report.features {
        writeln!(
            w,
            "{},{},{}",
            feature.name, feature.importance, feature.std_error
        )
        .map_err(|e| io_stdout(e, &args.out))?;
    }
    w.flush().map_err(|e| io_stdout(e, &args.out))?;
    Ok(())
}

fn cmd_stability(args: StabilityArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let ds = args.data.load()?;
    let params = args.params.resolve(&ds);
    let matrix = importance_stability(&ds, &params, args.forests, seed, workers)?;
    let mut w = output_writer(&args.out)?;
    let header: Vec<String> = (0..matrix.len()).map(|i| format!("forest_{i}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| io_stdout(e, &args.out))?;
    for row in &matrix {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", fields.join(",")).map_err(|e| io_stdout(e, &args.out))?;
    }
    w.flush().map_err(|e| io_stdout(e, &args.out))?;
    let m = matrix.len();
    let mut off_diagonal = 0.0;
    for a in 0..m {
        for b in 0..m {
            if a != b {
                off_diagonal += matrix[a][b];
            }
        }
    }
    eprintln!(
        "mean off-diagonal rank correlation: {:.4}",
        off_diagonal / (m * (m - 1)) as f64
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs, seed: u64) -> Result<(), Error> {
    match args.generator {
        SynthGenerator::Monks2 { out } => {
            let ds = synth_monks2(seed);
            write_csv(&ds, &out)?;
            eprintln!(
                "wrote {} rows x {} columns to {} (tip: load with \
                 --categorical attr1,attr2,attr3,attr4,attr5,attr6 --classify)",
                ds.n(),
                ds.p() + 1,
                out.display()
            );
        }
        SynthGenerator::Sparse {
            n,
            informative,
            noise,
            shift,
            out,
        } => {
            let ds = synth_sparse_signal_with_shift(n, informative, noise, shift, seed)?;
            write_csv(&ds, &out)?;
            eprintln!(
                "wrote {} rows x {} columns to {}",
                ds.n(),
                ds.p() + 1,
                out.display()
            );
        }
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs, seed: u64, workers: usize) -> Result<(), Error> {
    let mut datasets = Vec::new();
    for spec in &args.datasets {
        let (path, target) = spec.split_once('=').ok_or_else(|| {
            Error::Bench(format!("dataset spec {spec:?} must be path=target"))
        })?;
        let mut ds = load_csv(path, target, &HashMap::new())?;
        let wants_classification = args.measures.iter().any(|m| *m != Measure::Mse);
        if wants_classification && ds.task() == TaskKind::Regression {
            eprintln!("note: measures need classes; treating target {target:?} of {path} as categorical");
            let mut overrides = HashMap::new();
            overrides.insert(target.to_string(), TypeHint::Categorical);
            ds = load_csv(path, target, &overrides)?;
        }
        datasets.push(ds);
    }
    let measures = if args.measures.is_empty() {
        match datasets[0].task() {
            TaskKind::Classification => vec![Measure::Mmce, Measure::BrierMulticlass],
            TaskKind::Regression => vec![Measure::Mse],
        }
    } else {
        args.measures.clone()
    };
    let default_measure = Measure::default_for(datasets[0].task());
    let methods: Vec<bench::BenchMethod> = args
        .methods
        .iter()
        .map(|m| match m {
            MethodArg::Default => bench::BenchMethod::Default {
                num_trees: args.num_trees,
            },
            MethodArg::Smbo => bench::BenchMethod::Smbo {
                measure: default_measure,
                num_trees: args.num_trees,
                warmup: args.warmup,
                iters: args.iters,
                tuned: vec![
                    TunedParam::Mtry,
                    TunedParam::SampleFraction,
                    TunedParam::MinNodeSize,
                ],
            },
            MethodArg::Walk => bench::BenchMethod::MtryWalk {
                num_trees: args.num_trees,
            },
            MethodArg::Caret => bench::BenchMethod::CaretGrid {
                num_trees: args.num_trees,
                bootstrap_iters: 25,
            },
            MethodArg::Random => bench::BenchMethod::RandomSearch {
                measure: default_measure,
                num_trees: args.num_trees,
                points: args.points,
            },
        })
        .collect();

    // fold counts must be feasible on every dataset before the long run
    for ds in &datasets {
        make_cv_plan(ds, args.folds, 1, 0)?;
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|source| io_error(&args.out_dir, source))?;
    let config = bench::BenchConfig {
        folds: args.folds,
        reps: args.reps,
        seed,
        workers,
    };
    let result = bench::run_benchmark(&datasets, &methods, &measures, &config)?;
    let imputed = bench::impute_failures(&result)?;
    let summary = bench::aggregate_ranks(&imputed)?;

    save_to(&args.out_dir.join("means.csv"), |w| {
        bench::write_means_csv(&imputed, w)
    })?;
    save_to(&args.out_dir.join("ranks.csv"), |w| {
        bench::write_ranks_csv(&summary, w)
    })?;
    save_to(&args.out_dir.join("manifest.txt"), |w| {
        bench::write_manifest(w, &datasets, &methods, &measures, &config)
    })?;
    eprintln!("benchmark results written to {}", args.out_dir.display());
    Ok(())
}
