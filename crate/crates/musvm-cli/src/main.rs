//! `musvm`: train, evaluate and select multiclass universum SVMs from
//! sparse text datasets.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 the solver ran out
//! of its epoch budget (train still writes the best model found).

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use musvm::diagnostics::{class_projections, histogram, universum_projections, Histogram};
use musvm::io::{
    deserialize_model, parse_dataset, parse_universum, serialize_dataset, serialize_model,
    serialize_universum, ParsedDataset,
};
use musvm::model::{augment, classify_support_vectors, SvCategory};
use musvm::oracle::exact_loo_error;
use musvm::select::{two_step_select, KernelFamily, SelectPlan, SelectionMethod};
use musvm::span::loo_span_estimate;
use musvm::synth::{random_averaging_universum, ClusterSpec};
use musvm::verify::{run_suites, Suite};
use musvm::{
    configure_threads, gram_matrix, solve_dual, Dataset, Error, Hyperparams, KernelSpec, Model,
    SolveOptions, UniversumSet,
};

/// Multiclass SVM with universum contradictions: training, prediction,
/// leave-one-out bounds, model selection, projection histograms and a
/// self-check suite.
#[derive(Parser)]
#[command(name = "musvm", version, disable_help_subcommand = true)]
struct Cli {
    /// Worker threads for parallel paths (0 = one per core). Falls back to
    /// the MUSVM_THREADS environment variable. Results never depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a file.
    Train(TrainArgs),
    /// Predict labels for the samples of a dataset file.
    Predict(PredictArgs),
    /// Report the error rate of a model on a labeled dataset.
    Eval(EvalArgs),
    /// Two-step grid search: cost and kernel first, contradiction width second.
    Select(SelectArgs),
    /// Leave-one-out bounds of a training configuration without retraining per sample.
    Bound(BoundArgs),
    /// Exact leave-one-out error by retraining once per training sample.
    Loo(LooArgs),
    /// Histograms of decision-value projections, exported as CSV.
    Hist(HistArgs),
    /// Run the self-check suites against the built-in reference oracles.
    Verify(VerifyArgs),
    /// Generate a synthetic dataset with planted clusters and an optional
    /// universum of random training-pair averages.
    Gen(GenArgs),
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum KernelChoice {
    Linear,
    Rbf,
}

/// Kernel flags shared by the training-style subcommands.
#[derive(Args)]
struct KernelArgs {
    /// Kernel family.
    #[arg(long, value_enum, default_value_t = KernelChoice::Linear)]
    kernel: KernelChoice,
    /// RBF width gamma in exp(-gamma ||x-z||^2); only meaningful with --kernel rbf.
    #[arg(long, value_name = "G")]
    gamma: Option<f64>,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec, Error> {
        let spec = match self.kernel {
            KernelChoice::Linear => {
                if self.gamma.is_some() {
                    return Err(Error::InvalidParam(
                        "--gamma only applies to --kernel rbf".into(),
                    ));
                }
                KernelSpec::Linear
            }
            KernelChoice::Rbf => KernelSpec::Rbf {
                gamma: self.gamma.unwrap_or(KernelSpec::DEFAULT_GAMMA),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Cost flags shared by the training-style subcommands.
#[derive(Args)]
struct CostArgs {
    /// Misclassification cost on training rows.
    #[arg(short = 'C', long = "cost", value_name = "C")]
    cost: f64,
    /// Cost on universum rows; overrides --cstar-ratio.
    #[arg(long, value_name = "C*")]
    cstar: Option<f64>,
    /// `auto` balances total cost mass: C* = C n / (m L). The default when a
    /// universum file is given and --cstar is not.
    #[arg(long, value_name = "auto", conflicts_with = "cstar")]
    cstar_ratio: Option<String>,
    /// Width of the zero-loss tube around universum decision values.
    #[arg(long, default_value_t = 0.0, value_name = "D")]
    delta: f64,
}

impl CostArgs {
    fn resolve(&self, n: usize, m: usize, l: usize) -> Result<Hyperparams, Error> {
        if let Some(ratio) = &self.cstar_ratio {
            if ratio != "auto" {
                return Err(Error::InvalidParam(format!(
                    "--cstar-ratio accepts only `auto`, got `{ratio}`"
                )));
            }
        }
        let params = match self.cstar {
            Some(c_star) => Hyperparams { c: self.cost, c_star, delta: self.delta },
            None => Hyperparams::auto_c_star(self.cost, self.delta, n, m, l),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Solver flags shared by the training-style subcommands.
#[derive(Args)]
struct SolverArgs {
    /// Stop once the largest row optimality violation drops to this value.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Hard cap on solver epochs.
    #[arg(long, default_value_t = 20_000)]
    max_epochs: usize,
}

impl SolverArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_epochs: self.max_epochs, ..SolveOptions::default() }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training dataset (`label idx:val ...` lines).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Unlabeled universum dataset; labels in the file are ignored.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output model file.
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Samples to classify; labels in the file are ignored (0 is fine).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Write predictions here instead of stdout, one label per line.
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Labeled dataset to score.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum MethodChoice {
    /// Stratified k-fold cross-validation.
    Cv,
    /// Span-based leave-one-out estimate from a single solve per point.
    Span,
}

#[derive(Args)]
struct SelectArgs {
    /// Labeled training dataset.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Unlabeled universum dataset for the second stage.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    /// Error estimator driving the search.
    #[arg(long, value_enum, default_value_t = MethodChoice::Span)]
    method: MethodChoice,
    /// Fold count for --method cv.
    #[arg(long, default_value_t = 5, value_name = "K")]
    folds: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Comma-separated training-cost grid.
    #[arg(long, value_name = "C,C,...", value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// Comma-separated RBF width grid (ignored for --kernel linear).
    #[arg(long, value_name = "G,G,...", value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    /// Comma-separated contradiction-width grid for the second stage.
    #[arg(long, value_name = "D,D,...", value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    /// Fold-assignment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance for the selection solves.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Write every evaluated grid point with its estimate and wall clock as CSV.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum BoundChoice {
    /// Fast closed-form span estimate.
    Estimate,
    /// Guaranteed upper bound from constrained spans and the data diameter.
    Guaranteed,
    /// Both reports.
    Both,
}

#[derive(Args)]
struct BoundArgs {
    /// Labeled training dataset.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Unlabeled universum dataset.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Which leave-one-out report to compute.
    #[arg(long, value_enum, default_value_t = BoundChoice::Both)]
    method: BoundChoice,
}

#[derive(Args)]
struct LooArgs {
    /// Labeled training dataset.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Unlabeled universum dataset.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    #[command(flatten)]
    cost: CostArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Solver tolerance for the per-sample retrainings.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct HistArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Labeled dataset projected onto each sample's own class.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Universum samples projected onto every class.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    /// Number of histogram bins.
    #[arg(long, default_value_t = 32)]
    bins: usize,
    /// Output CSV: component,class,bin_left,bin_right,count.
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run: solver, span, binary, bound or all.
    #[arg(long, default_value = "all", value_name = "NAME")]
    suite: String,
    /// Instance-generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run fewer instances per suite.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Output training dataset file.
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: PathBuf,
    /// Also write a held-out test dataset drawn from the same clusters.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    /// Also write a universum of random averages of training pairs
    /// drawn from different classes.
    #[arg(long, value_name = "FILE")]
    universum: Option<PathBuf>,
    /// Universum size; defaults to the training set size.
    #[arg(long, value_name = "M")]
    universum_size: Option<usize>,
    /// Number of classes (planted clusters).
    #[arg(long, default_value_t = 3, value_name = "L")]
    classes: usize,
    /// Informative dimensions carrying the cluster structure.
    #[arg(long, default_value_t = 2, value_name = "D")]
    dim: usize,
    /// Pure-noise dimensions appended after the informative ones.
    #[arg(long, default_value_t = 0, value_name = "D")]
    noise_dims: usize,
    /// Training samples per class.
    #[arg(long, default_value_t = 50, value_name = "N")]
    per_class: usize,
    /// Test samples per class.
    #[arg(long, default_value_t = 200, value_name = "N")]
    test_per_class: usize,
    /// Distance of each cluster center from the origin.
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    /// Standard deviation of the within-cluster noise.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let usage_ok = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if usage_ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Maps library errors onto the documented exit codes.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParam(_) | Error::SizeCap { .. } => 1,
        Error::Parse { .. }
        | Error::Io(_)
        | Error::FormatVersion(_)
        | Error::DimensionMismatch(_)
        | Error::Stratification(_)
        | Error::SingularSystem { .. } => 2,
        Error::NonConvergence { .. } => 3,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let threads = match cli.threads {
        Some(n) => n,
        None => match std::env::var("MUSVM_THREADS") {
            Ok(raw) => raw.parse::<usize>().map_err(|_| {
                Error::InvalidParam(format!("MUSVM_THREADS must be an integer, got `{raw}`"))
            })?,
            Err(_) => 0,
        },
    };
    configure_threads(threads)?;

    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Select(args) => cmd_select(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Loo(args) => cmd_loo(args),
        Command::Hist(args) => cmd_hist(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_dataset(path: &Path) -> Result<ParsedDataset, Error> {
    parse_dataset(&read_to_string(path)?)
}

fn load_universum(path: Option<&PathBuf>) -> Result<UniversumSet, Error> {
    match path {
        Some(p) => parse_universum(&read_to_string(p)?),
        None => Ok(UniversumSet::default()),
    }
}

/// Re-expresses a parsed dataset in the model's internal class ids.
fn align_to_model(parsed: &ParsedDataset, model: &Model) -> Result<Dataset, Error> {
    let to_model: Vec<usize> = parsed
        .label_map
        .iter()
        .map(|ext| {
            model.label_map.iter().position(|m| m == ext).ok_or_else(|| {
                Error::DimensionMismatch(format!("dataset label {ext} is unknown to the model"))
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Dataset {
        samples: parsed.data.samples.clone(),
        labels: parsed.data.labels.iter().map(|&y| to_model[y]).collect(),
        n_classes: model.n_classes,
    })
}

/// Parses, augments and solves a training configuration; shared by the
/// train, bound and loo subcommands.
struct Trained {
    parsed: ParsedDataset,
    universum: UniversumSet,
    params: Hyperparams,
    kernel: KernelSpec,
}

fn prepare(
    data: &Path,
    universum: Option<&PathBuf>,
    cost: &CostArgs,
    kernel: &KernelArgs,
) -> Result<Trained, Error> {
    let parsed = load_dataset(data)?;
    let universum = load_universum(universum)?;
    let params = cost.resolve(parsed.data.len(), universum.len(), parsed.data.n_classes)?;
    let kernel = kernel.spec()?;
    Ok(Trained { parsed, universum, params, kernel })
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode, Error> {
    let t = prepare(&args.data, args.universum.as_ref(), &args.cost, &args.kernel)?;
    let problem = augment(&t.parsed.data, &t.universum, &t.params)?;
    let gram = gram_matrix(t.kernel, &problem.samples)?;
    let solution = solve_dual(&problem, &gram, &args.solver.options())?;

    let partition = classify_support_vectors(&solution, &problem);
    let mut counts = [[0usize; 2]; 2]; // [train|universum][margin|at-bound]
    for i in 0..problem.n_rows() {
        let kind = usize::from(!problem.is_train_row(i));
        match partition.category[i] {
            SvCategory::Margin => counts[kind][0] += 1,
            SvCategory::AtBound => counts[kind][1] += 1,
            SvCategory::NonSv => {}
        }
    }

    let model =
        Model::from_solution(&problem, t.kernel, t.params, &solution, t.parsed.label_map.clone())?;
    write_file(&args.out, &serialize_model(&model))?;

    println!("dual objective: {:.12e}", solution.objective);
    println!(
        "support vectors: {} on-margin + {} at-bound training, {} on-margin + {} at-bound universum",
        counts[0][0], counts[0][1], counts[1][0], counts[1][1]
    );
    println!("training error: {:.6}", model.error_rate(&t.parsed.data));
    println!("model written to {}", args.out.display());
    if !solution.converged {
        eprintln!(
            "warning: stopped at the epoch cap with optimality gap {:.3e}; model written anyway",
            solution.kkt_gap
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(args: PredictArgs) -> Result<ExitCode, Error> {
    let model = deserialize_model(&read_to_string(&args.model)?)?;
    let samples = parse_universum(&read_to_string(&args.data)?)?;
    let mut out = String::new();
    for x in &samples.samples {
        let _ = writeln!(out, "{}", model.predict_label(x));
    }
    match &args.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let model = deserialize_model(&read_to_string(&args.model)?)?;
    let parsed = load_dataset(&args.data)?;
    let mut mistakes = 0usize;
    for (x, &y) in parsed.data.samples.iter().zip(&parsed.data.labels) {
        if model.predict_label(x) != parsed.label_map[y] {
            mistakes += 1;
        }
    }
    let n = parsed.data.len();
    println!("error rate: {:.6} ({mistakes} of {n} misclassified)", mistakes as f64 / n as f64);
    Ok(ExitCode::SUCCESS)
}

fn cmd_select(args: SelectArgs) -> Result<ExitCode, Error> {
    let parsed = load_dataset(&args.data)?;
    let universum = load_universum(args.universum.as_ref())?;
    let family = match args.kernel.kernel {
        KernelChoice::Linear => KernelFamily::Linear,
        KernelChoice::Rbf => KernelFamily::Rbf,
    };
    let method = match args.method {
        MethodChoice::Cv => SelectionMethod::CrossValidation { k: args.folds },
        MethodChoice::Span => SelectionMethod::SpanEstimate,
    };
    let mut plan = SelectPlan::default_for(family, method);
    plan.seed = args.seed;
    plan.tol = args.tol;
    if let Some(grid) = args.c_grid {
        plan.c_grid = grid;
    }
    if let Some(grid) = args.gamma_grid {
        plan.gamma_grid = grid;
    }
    if let Some(grid) = args.delta_grid {
        plan.delta_grid = grid;
    }

    let selection = two_step_select(&parsed.data, &universum, &plan)?;

    if let Some(path) = &args.report {
        let mut csv = String::from("stage,c,gamma,c_star,delta,estimate,seconds\n");
        for (stage, point) in selection
            .first_stage
            .iter()
            .map(|p| (1, p))
            .chain(selection.second_stage.iter().map(|p| (2, p)))
        {
            let gamma = point.gamma.map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{stage},{},{gamma},{},{},{:.6},{:.6}",
                point.c, point.c_star, point.delta, point.estimate, point.seconds
            );
        }
        write_file(path, &csv)?;
    }

    let gamma = match selection.kernel {
        KernelSpec::Linear => "-".to_string(),
        KernelSpec::Rbf { gamma } => gamma.to_string(),
    };
    println!(
        "chosen: C={} gamma={gamma} C*={} delta={}",
        selection.params.c, selection.params.c_star, selection.params.delta
    );
    println!("estimated error: {:.6}", selection.estimate);
    println!("search wall clock: {:.3}s", selection.seconds);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(args: BoundArgs) -> Result<ExitCode, Error> {
    let t = prepare(&args.data, args.universum.as_ref(), &args.cost, &args.kernel)?;
    let problem = augment(&t.parsed.data, &t.universum, &t.params)?;
    let gram = gram_matrix(t.kernel, &problem.samples)?;
    let solution = solve_dual(&problem, &gram, &args.solver.options())?;
    if !solution.converged {
        return Err(Error::NonConvergence {
            what: "training solve under the bound subcommand".into(),
            residual: solution.kkt_gap,
            iters: solution.epochs,
        });
    }

    if matches!(args.method, BoundChoice::Estimate | BoundChoice::Both) {
        let report = loo_span_estimate(&problem, &gram, &solution, None)?;
        println!(
            "span estimate: {:.6} ({} flagged of {} training samples)",
            report.estimate,
            report.flagged.len(),
            problem.n_train
        );
    }
    if matches!(args.method, BoundChoice::Guaranteed | BoundChoice::Both) {
        let report = musvm::verify::hard_loo_bound(&problem, &gram, &solution)?;
        println!(
            "guaranteed bound: {:.6} ({} at-bound + {} large-span of {} training samples)",
            report.bound, report.at_bound_count, report.large_span_count, problem.n_train
        );
        println!(
            "  data diameter {:.6}, span threshold scale {:.6}",
            report.diameter, report.threshold_scale
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_loo(args: LooArgs) -> Result<ExitCode, Error> {
    let t = prepare(&args.data, args.universum.as_ref(), &args.cost, &args.kernel)?;
    let start = Instant::now();
    let result = exact_loo_error(&t.parsed.data, &t.universum, &t.params, t.kernel, args.tol)?;
    let mistakes = result.mistakes.iter().filter(|&&m| m).count();
    println!(
        "exact leave-one-out error: {:.6} ({mistakes} of {} mistakes, {:.3}s)",
        result.error_rate,
        t.parsed.data.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

fn append_histogram(csv: &mut String, component: &str, class: i64, hist: &Histogram) {
    for (b, &count) in hist.counts.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{component},{class},{},{},{count}",
            hist.edges[b],
            hist.edges[b + 1]
        );
    }
}

fn cmd_hist(args: HistArgs) -> Result<ExitCode, Error> {
    let model = deserialize_model(&read_to_string(&args.model)?)?;
    let parsed = load_dataset(&args.data)?;
    let aligned = align_to_model(&parsed, &model)?;
    let universum = load_universum(args.universum.as_ref())?;

    let mut csv = String::from("component,class,bin_left,bin_right,count\n");
    for (k, values) in class_projections(&model, &aligned)?.iter().enumerate() {
        append_histogram(&mut csv, "train", model.label_map[k], &histogram(values, args.bins));
    }
    if !universum.is_empty() {
        for (k, values) in universum_projections(&model, &universum).iter().enumerate() {
            append_histogram(
                &mut csv,
                "universum",
                model.label_map[k],
                &histogram(values, args.bins),
            );
        }
    }
    write_file(&args.out, &csv)?;
    println!("histograms written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let suite = Suite::parse(&args.suite).ok_or_else(|| {
        Error::InvalidParam(format!(
            "unknown suite `{}`; expected solver, span, binary, bound or all",
            args.suite
        ))
    })?;
    let reports = run_suites(suite, args.seed, args.quick)?;
    let mut failed = 0usize;
    for report in &reports {
        let skipped = if report.skipped > 0 {
            format!(", {} skipped", report.skipped)
        } else {
            String::new()
        };
        println!(
            "suite {}: {} passed, {} failed{skipped}",
            report.name, report.passed, report.failed
        );
        for line in &report.lines {
            println!("  {line}");
        }
        failed += report.failed;
    }
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        return Ok(ExitCode::from(1));
    }
    println!("all checks passed");
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, Error> {
    if args.classes < 2 {
        return Err(Error::InvalidParam("--classes must be at least 2".into()));
    }
    if args.dim == 0 || args.per_class == 0 {
        return Err(Error::InvalidParam("--dim and --per-class must be positive".into()));
    }
    let spec = ClusterSpec {
        n_classes: args.classes,
        dim: args.dim + args.noise_dims,
        train_per_class: args.per_class,
        test_per_class: args.test_per_class,
        separation: args.separation,
        spread: args.spread,
        noise_dims: args.noise_dims,
    };
    let (train, test) = spec.sample(args.seed);
    let label_map: Vec<i64> = (1..=args.classes as i64).collect();

    write_file(&args.out, &serialize_dataset(&train, &label_map))?;
    println!("wrote {} training samples to {}", train.len(), args.out.display());
    if let Some(path) = &args.test {
        write_file(path, &serialize_dataset(&test, &label_map))?;
        println!("wrote {} test samples to {}", test.len(), path.display());
    }
    if let Some(path) = &args.universum {
        let m = args.universum_size.unwrap_or(train.len());
        if m == 0 {
            return Err(Error::InvalidParam("--universum-size must be positive".into()));
        }
        let universum = random_averaging_universum(&train, m, args.seed.wrapping_add(1));
        write_file(path, &serialize_universum(&universum))?;
        println!("wrote {} universum samples to {}", universum.len(), path.display());
    } else if args.universum_size.is_some() {
        return Err(Error::InvalidParam("--universum-size requires --universum".into()));
    }
    Ok(ExitCode::SUCCESS)
}
