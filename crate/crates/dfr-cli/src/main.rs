//! Command-line front end: synthetic data, training, evaluation, the
//! grid-search baseline, gradient checking, memory accounting, and the
//! head-to-head experiment.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! divergence or solver failure.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dfr_core::dataset::{generate_synthetic, load_dataset, normalize, write_dataset, SynthSpec};
use dfr_core::gridsearch::{escalate, grid_search, Escalation, GridConfig, GridResult};
use dfr_core::report::{memory_counts, run_experiment, ExperimentConfig};
use dfr_core::reservoir::{Mask, NonlinearityKind, ReservoirParams, TraceMode};
use dfr_core::rng::SplitMix64;
use dfr_core::trainer::{evaluate_head, train, ModelFile, ReservoirConfig, TrainConfig};
use dfr_core::{Dataset, Error, OutputHead, Sample};

#[derive(Parser)]
#[command(
    name = "dfr",
    version,
    about = "Delayed-feedback reservoir classifiers: gradient training vs grid search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic two-class dataset
    Synth(SynthArgs),
    /// Train a classifier with gradient descent and ridge refit
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset split
    Eval(EvalArgs),
    /// Run the grid-search baseline, optionally escalating to a target accuracy
    Gridsearch(GridArgs),
    /// Compare analytic reservoir gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Report stored-value counts for full vs truncated backpropagation
    Memreport(MemArgs),
    /// Timed head-to-head: gradient training vs escalating grid search
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    FrequencyPair,
    AmplitudePair,
}

#[derive(Clone, Copy, ValueEnum)]
enum BpArg {
    Truncated,
    Full,
}

impl From<BpArg> for TraceMode {
    fn from(bp: BpArg) -> TraceMode {
        match bp {
            BpArg::Truncated => TraceMode::Truncated,
            BpArg::Full => TraceMode::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    MackeyGlass,
    Both,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Samples per class per split
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    /// Series length
    #[arg(long = "T", default_value_t = 64)]
    t: usize,
    /// Input features per time step
    #[arg(long, default_value_t = 1)]
    features: usize,
    /// Additive Gaussian noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Reservoir node count
    #[arg(long, default_value_t = 30)]
    nx: usize,
    #[arg(long, default_value_t = 1)]
    mask_seed: u64,
    #[arg(long, default_value_t = 1)]
    shuffle_seed: u64,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    /// Backpropagation variant
    #[arg(long, value_enum, default_value = "truncated")]
    bp: BpArg,
    /// Comma-separated ridge regularization candidates
    #[arg(long, default_value = "1e-6,1e-4,1e-2,1")]
    betas: String,
    /// Skip train-split standardization
    #[arg(long)]
    no_normalize: bool,
    /// Score regularization candidates on this held-out fraction of the
    /// train features instead of the fitting rows
    #[arg(long)]
    beta_holdout: Option<f64>,
    /// Where to write the trained model (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Split to score: test or train
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 30)]
    nx: usize,
    #[arg(long, default_value_t = 1)]
    mask_seed: u64,
    #[arg(long, default_value = "1e-6,1e-4,1e-2,1")]
    betas: String,
    #[arg(long)]
    no_normalize: bool,
    /// Grid divisions per axis
    #[arg(long, default_value_t = 1, conflicts_with = "escalate")]
    divisions: usize,
    /// Escalate divisions from 1 until --target accuracy is reached
    #[arg(long)]
    escalate: bool,
    /// Target accuracy for escalation
    #[arg(long, requires = "escalate")]
    target: Option<f64>,
    /// Escalation stops after this many divisions per axis
    #[arg(long, default_value_t = 20)]
    max_div: usize,
    /// Write per-cell results as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full result as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Series length upper bound
    #[arg(long = "T", default_value_t = 10)]
    t: usize,
    /// Node count upper bound
    #[arg(long, default_value_t = 5)]
    nx: usize,
    /// Class count upper bound
    #[arg(long, default_value_t = 4)]
    ny: usize,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct MemArgs {
    /// Series length
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 30)]
    nx: usize,
    /// Class count
    #[arg(long)]
    ny: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 30)]
    nx: usize,
    #[arg(long, default_value_t = 1)]
    mask_seed: u64,
    #[arg(long, default_value_t = 1)]
    shuffle_seed: u64,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, value_enum, default_value = "truncated")]
    bp: BpArg,
    #[arg(long, default_value = "1e-6,1e-4,1e-2,1")]
    betas: String,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value_t = 20)]
    max_div: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::Divergence { .. })
        | Some(Error::TrainingDiverged { .. })
        | Some(Error::Solver(_)) => 3,
        Some(_) => 2,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some()
                || err.downcast_ref::<serde_json::Error>().is_some()
            {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gridsearch(args) => cmd_gridsearch(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Memreport(args) => cmd_memreport(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn parse_betas(text: &str) -> anyhow::Result<Vec<f64>> {
    let betas: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid beta value {s:?}"))
        })
        .collect::<anyhow::Result<_>>()?;
    if betas.is_empty() || betas.iter().any(|b| !b.is_finite() || *b <= 0.0) {
        bail!("betas must be a non-empty list of positive numbers");
    }
    Ok(betas)
}

fn load_and_normalize(path: &Path, no_normalize: bool) -> anyhow::Result<Dataset> {
    let dataset = load_dataset(path)?;
    if no_normalize {
        Ok(dataset)
    } else {
        Ok(normalize(&dataset).0)
    }
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SynthSpec {
        task: match args.task {
            TaskArg::FrequencyPair => dfr_core::SynthTask::FrequencyPair,
            TaskArg::AmplitudePair => dfr_core::SynthTask::AmplitudePair,
        },
        per_class: args.per_class,
        len: args.t,
        n_features: args.features,
        noise: args.noise,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    write_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} ({} train / {} test samples, T = {}, {} features) to {}",
        dataset.name,
        dataset.train.len(),
        dataset.test.len(),
        args.t,
        args.features,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let dataset = load_and_normalize(&args.data, args.no_normalize)?;
    let reservoir = ReservoirConfig {
        n_x: args.nx,
        kind: NonlinearityKind::Linear,
        mask_seed: args.mask_seed,
    };
    let config = TrainConfig {
        epochs: args.epochs,
        betas: parse_betas(&args.betas)?,
        bp_mode: args.bp.into(),
        shuffle_seed: args.shuffle_seed,
        beta_holdout: args.beta_holdout,
        ..TrainConfig::default()
    };
    let model = train(&dataset, &reservoir, &config)?;

    println!("epoch  lr_res    lr_out    loss      acc     clamped  skipped");
    for (i, e) in model.history.iter().enumerate() {
        println!(
            "{:<5}  {:<8.1e}  {:<8.1e}  {:<8.4}  {:<6.4}  {:<7}  {}",
            i + 1,
            e.lr_res,
            e.lr_out,
            e.mean_loss,
            e.accuracy,
            e.clamped,
            e.skipped
        );
    }
    println!(
        "final a = {:.6}, b = {:.6}; refit beta = {:e} (selection loss {:.6})",
        model.params.a, model.params.b, model.beta, model.refit_loss
    );
    let (train_acc, train_loss) = model.evaluate(&dataset.train)?;
    let (test_acc, test_loss) = model.evaluate(&dataset.test)?;
    println!("train accuracy {train_acc:.4} (loss {train_loss:.4})");
    println!("test  accuracy {test_acc:.4} (loss {test_loss:.4})");

    ModelFile::from_model(&model, !args.no_normalize).save(&args.out)?;
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let model = ModelFile::load(&args.model)?;
    let dataset = load_and_normalize(&args.data, !model.normalize)?;
    if dataset.n_features != model.n_u {
        bail!(Error::DimensionMismatch(format!(
            "model expects {} features, dataset has {}",
            model.n_u, dataset.n_features
        )));
    }
    if dataset.n_classes != model.n_y {
        bail!(Error::DimensionMismatch(format!(
            "model expects {} classes, dataset has {}",
            model.n_y, dataset.n_classes
        )));
    }
    let split: &[Sample] = match args.split.as_str() {
        "test" => &dataset.test,
        "train" => &dataset.train,
        other => bail!("unknown split {other:?} (use test or train)"),
    };
    let (params, head) = model.into_parts();
    let (accuracy, mean_loss) = evaluate_head(&params, &head, split)?;
    println!(
        "{} split: accuracy {:.4}, mean loss {:.6} ({} samples)",
        args.split,
        accuracy,
        mean_loss,
        split.len()
    );
    Ok(())
}

fn write_cells_csv(path: &Path, result: &GridResult) -> anyhow::Result<()> {
    let mut text =
        String::from("a_index,b_index,a,b,beta,train_loss,test_accuracy,diverged\n");
    for c in &result.cells {
        let beta = c.beta.map_or(String::new(), |b| format!("{b:e}"));
        let train_loss = c.train_loss.map_or(String::new(), |l| l.to_string());
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.a_index, c.b_index, c.a, c.b, beta, train_loss, c.test_accuracy, c.diverged
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Accuracy matrix, a-points down, b-points across.
fn print_grid_table(result: &GridResult) {
    let d = result.divisions;
    let b_points: Vec<f64> = result.cells[..d].iter().map(|c| c.b).collect();
    print!("{:>11}", "a \\ b");
    for b in &b_points {
        print!("  {b:>9.4e}");
    }
    println!();
    for ai in 0..d {
        print!("{:>11.4e}", result.cells[ai * d].a);
        for bi in 0..d {
            let cell = &result.cells[ai * d + bi];
            if cell.diverged {
                print!("  {:>9}", "div");
            } else {
                print!("  {:>9.4}", cell.test_accuracy);
            }
        }
        println!();
    }
    let best = result.best_cell();
    println!(
        "best: a = {:.6e}, b = {:.6e}, beta = {}, test accuracy {:.4} ({:.2} s)",
        best.a,
        best.b,
        best.beta.map_or("-".into(), |b| format!("{b:e}")),
        best.test_accuracy,
        result.seconds
    );
}

fn cmd_gridsearch(args: GridArgs) -> anyhow::Result<()> {
    let dataset = load_and_normalize(&args.data, args.no_normalize)?;
    let base = GridConfig {
        betas: parse_betas(&args.betas)?,
        ..GridConfig::new(
            ReservoirConfig {
                n_x: args.nx,
                kind: NonlinearityKind::Linear,
                mask_seed: args.mask_seed,
            },
            args.divisions,
        )
    };

    if args.escalate {
        let target = args
            .target
            .ok_or_else(|| anyhow::anyhow!("--escalate requires --target"))?;
        let esc: Escalation = escalate(&dataset, &base, target, args.max_div)?;
        for level in &esc.levels {
            println!(
                "divisions {:>3}: best accuracy {:.4} ({:.2} s)",
                level.divisions, level.best_accuracy, level.seconds
            );
        }
        if esc.reached {
            println!(
                "target {target:.4} reached at {} divisions ({} cells, {:.2} s total)",
                esc.divisions, esc.cells_evaluated, esc.seconds
            );
        } else {
            println!(
                "target {target:.4} not reached within {} divisions; best level:",
                args.max_div
            );
        }
        print_grid_table(&esc.result);
        if let Some(path) = &args.csv {
            write_cells_csv(path, &esc.result)?;
        }
        if let Some(path) = &args.json {
            std::fs::write(path, serde_json::to_string_pretty(&esc)? + "\n")?;
        }
    } else {
        let result = grid_search(&dataset, &base)?;
        print_grid_table(&result);
        if let Some(path) = &args.csv {
            write_cells_csv(path, &result)?;
        }
        if let Some(path) = &args.json {
            std::fs::write(path, serde_json::to_string_pretty(&result)? + "\n")?;
        }
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    if args.trials == 0 || args.t == 0 || args.nx == 0 || args.ny < 2 {
        bail!("gradcheck needs trials >= 1, T >= 1, nx >= 1, ny >= 2");
    }
    let mut rng = SplitMix64::new(args.seed);
    let mut max_rel: f64 = 0.0;
    let mut max_abs_small: f64 = 0.0;
    let mut failures = 0u64;

    for trial in 0..args.trials {
        let kind = match args.kind {
            KindArg::Linear => NonlinearityKind::Linear,
            KindArg::MackeyGlass => NonlinearityKind::MackeyGlass { p: 2 },
            KindArg::Both => {
                if trial % 2 == 0 {
                    NonlinearityKind::Linear
                } else {
                    NonlinearityKind::MackeyGlass { p: 2 }
                }
            }
        };
        let n_x = 1 + rng.below(args.nx);
        let n_u = 1 + rng.below(3);
        let n_y = 2 + rng.below(args.ny - 1);
        let t = 1 + rng.below(args.t);
        let mask = Mask::generate(trial, n_x, n_u);
        let params =
            ReservoirParams::new(rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.5), kind, mask);
        let sample = Sample {
            label: rng.below(n_y),
            series: (0..t)
                .map(|_| (0..n_u).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect(),
        };
        let n_r = n_x * (n_x + 1);
        let head = OutputHead {
            weights: (0..n_y)
                .map(|_| (0..n_r).map(|_| rng.uniform(-0.8, 0.8)).collect())
                .collect(),
            bias: (0..n_y).map(|_| rng.uniform(-0.3, 0.3)).collect(),
        };

        let (trace, feats) = dfr_core::dprr::forward(&params, &sample, TraceMode::Full)?;
        let pred = dfr_core::forward_head(&head, feats.values());
        let grads = dfr_core::head_gradients(&pred, sample.label, feats.values(), &head);
        let analytic = dfr_core::full_bptt(&params, &sample, &trace, &grads.d_features)?;
        let fd = dfr_core::finite_diff_grads(&params, &sample, &head, 1e-6)?;

        for (a, f) in [(analytic.d_a, fd.d_a), (analytic.d_b, fd.d_b)] {
            let err = (a - f).abs();
            if err > (1e-5 * f.abs()).max(1e-8) {
                failures += 1;
            }
            if f.abs() >= 1e-6 {
                max_rel = max_rel.max(err / f.abs());
            } else {
                max_abs_small = max_abs_small.max(err);
            }
        }
    }

    println!(
        "{} trials: max relative error {max_rel:.3e} (tolerance 1e-5), \
         max absolute error {max_abs_small:.3e} on tiny references (tolerance 1e-8)",
        args.trials
    );
    if failures > 0 {
        bail!(Error::Solver(format!(
            "{failures} gradient comparisons exceeded tolerance"
        )));
    }
    println!("PASS");
    Ok(())
}

fn cmd_memreport(args: MemArgs) -> anyhow::Result<()> {
    let report = memory_counts(args.t, args.nx, args.ny);
    println!("T {}  n_x {}  classes {}", report.series_len, report.n_x, report.n_y);
    println!("naive stored values      {}", report.naive);
    println!("truncated stored values  {}", report.simplified);
    println!("reduction                {} %", report.reduction_percent());
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let dataset = load_and_normalize(&args.data, args.no_normalize)?;
    let config = ExperimentConfig {
        reservoir: ReservoirConfig {
            n_x: args.nx,
            kind: NonlinearityKind::Linear,
            mask_seed: args.mask_seed,
        },
        train: TrainConfig {
            epochs: args.epochs,
            betas: parse_betas(&args.betas)?,
            bp_mode: args.bp.into(),
            shuffle_seed: args.shuffle_seed,
            ..TrainConfig::default()
        },
        max_divisions: args.max_div,
        ..ExperimentConfig::default()
    };
    let outcome = run_experiment(&dataset, &config)?;
    let r = &outcome.report;

    println!("dataset        {}", r.dataset);
    println!("bp accuracy    {:.4}", r.bp_accuracy);
    println!("bp time (s)    {:.3}", r.bp_seconds);
    println!(
        "gs divs        {}{}",
        r.grid_divisions,
        if r.grid_reached { "" } else { " (target not reached)" }
    );
    println!("gs accuracy    {:.4}", r.grid_accuracy);
    println!("gs time (s)    {:.3}", r.grid_seconds);
    println!("gs/bp ratio    {:.2}", r.speedup);
    println!(
        "memory         naive {} / truncated {} / reduction {} %",
        r.memory.naive,
        r.memory.simplified,
        r.memory.reduction_percent()
    );

    if let Some(path) = &args.json {
        std::fs::write(path, r.to_json()?)?;
    }
    if let Some(path) = &args.csv {
        let text = format!(
            "dataset,bp_acc,bp_seconds,gs_divs,gs_reached,gs_acc,gs_seconds,ratio,mem_naive,mem_simplified,mem_reduction\n{},{},{},{},{},{},{},{},{},{},{}\n",
            r.dataset,
            r.bp_accuracy,
            r.bp_seconds,
            r.grid_divisions,
            r.grid_reached,
            r.grid_accuracy,
            r.grid_seconds,
            r.speedup,
            r.memory.naive,
            r.memory.simplified,
            r.memory.reduction
        );
        std::fs::write(path, text)?;
    }
    Ok(())
}
