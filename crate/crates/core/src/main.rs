use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use margokit::data::{gen_collection_with, gen_regression_collection, read_bags, write_bags};
use margokit::experiment::{default_template, defaults, run_sweep, write_approx_report, ExperimentGrid};
use margokit::features::{approx_error_stats, ApproxConfig};
use margokit::learner::{
    evaluate, load_model, predict_points, save_model, sign_label, train, Approach, PoolingWeights, TrainConfig, Trainer,
};
use margokit::modelsel::{select_hyperparameters, write_score_table, GridSpec, Param, ParamAxis};
use margokit::solver::Loss;
use margokit::{Error, KernelSpec};

#[derive(Parser)]
#[command(name = "margokit", version, about = "Marginal transfer learning across tasks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic bag collection.
    Synth(SynthArgs),
    /// Train a model on a labelled bag CSV.
    Train(TrainArgs),
    /// Write margins for every point of a bag CSV.
    Predict(PredictArgs),
    /// Print an evaluation report (JSON) for a labelled bag CSV.
    Eval(EvalArgs),
    /// Run the N x n synthetic experiment.
    Sweep(SweepArgs),
    /// Measure random-feature approximation error against the bound.
    ApproxCheck(ApproxArgs),
    /// Cross-validate hyperparameters.
    Cv(CvArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mtl,
    Pooling,
}

impl From<MethodArg> for Approach {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mtl => Approach::Mtl,
            MethodArg::Pooling => Approach::Pooling,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainerArg {
    Exact,
    Rff,
    Nystrom,
}

impl From<TrainerArg> for Trainer {
    fn from(t: TrainerArg) -> Self {
        match t {
            TrainerArg::Exact => Trainer::Exact,
            TrainerArg::Rff => Trainer::Rff,
            TrainerArg::Nystrom => Trainer::Nystrom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Hinge,
    Eps,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    tasks: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Semi-major axis.
    #[arg(long, default_value_t = margokit::data::DEFAULT_SEMI_MAJOR)]
    a: f64,
    /// Semi-minor axis.
    #[arg(long, default_value_t = margokit::data::DEFAULT_SEMI_MINOR)]
    b: f64,
    /// Generate the heteroscedastic regression tasks instead of ellipses.
    #[arg(long)]
    regression: bool,
}

/// Kernel, regularization and feature-map options shared by train, sweep and cv.
#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossArg,
    /// Tube half-width of the eps-insensitive loss (default: 0.1 sd of the labels).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = defaults::LAMBDA)]
    lambda: f64,
    #[arg(long = "sigma-x", default_value_t = defaults::SIGMA_X)]
    sigma_x: f64,
    #[arg(long = "sigma-xp", default_value_t = defaults::SIGMA_XP)]
    sigma_xp: f64,
    #[arg(long = "sigma-p", default_value_t = defaults::SIGMA_P)]
    sigma_p: f64,
    /// Inner random features (bag embedding).
    #[arg(long = "L", default_value_t = defaults::RFF_L)]
    l: usize,
    /// Outer random features.
    #[arg(long = "Q", default_value_t = defaults::RFF_Q)]
    q: usize,
    /// Nystrom landmarks.
    #[arg(long, default_value_t = defaults::NYSTROM_M)]
    m: usize,
    /// Weight pooled examples by 1/M instead of 1/(N n_i).
    #[arg(long)]
    concatenate: bool,
    /// Solver tolerance (relative duality gap for rff/nystrom, KKT violation for exact).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-epochs")]
    max_epochs: Option<usize>,
}

impl ModelArgs {
    fn config(&self, labels_for_eps: Option<&[f64]>) -> margokit::Result<TrainConfig> {
        let spec = KernelSpec::all_gaussian(self.sigma_x, self.sigma_xp, self.sigma_p)?;
        let mut cfg = TrainConfig {
            spec,
            lambda: self.lambda,
            ..default_template()
        };
        cfg.rff_inner = self.l;
        cfg.rff_outer = self.q;
        cfg.nystrom_m = self.m;
        cfg.loss = match (self.loss, self.epsilon) {
            (LossArg::Hinge, None) => Loss::Hinge,
            (LossArg::Hinge, Some(_)) => return Err(Error::InvalidParameter("--epsilon needs --loss eps".into())),
            (LossArg::Eps, Some(e)) => Loss::eps_insensitive(e)?,
            (LossArg::Eps, None) => match labels_for_eps {
                Some(y) => Loss::eps_from_labels(y),
                None => return Err(Error::InvalidParameter("--loss eps needs --epsilon here".into())),
            },
        };
        if self.concatenate {
            cfg.pooling_weights = PoolingWeights::Concatenate;
        }
        if let Some(tol) = self.tol {
            cfg.linear.tol = tol;
            cfg.dual.tol = tol;
        }
        if let Some(e) = self.max_epochs {
            cfg.linear.max_epochs = e;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "mtl")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "rff")]
    trainer: TrainerArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated task counts N.
    #[arg(long, value_delimiter = ',', default_value = "16,64,256")]
    tasks: Vec<usize>,
    /// Comma-separated points per task n.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,256")]
    points: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mtl,pooling")]
    methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value = "rff")]
    trainer: TrainerArg,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "test-tasks", default_value_t = defaults::TEST_TASKS)]
    test_tasks: usize,
    #[arg(long = "test-points", default_value_t = defaults::TEST_POINTS)]
    test_points: usize,
    #[command(flatten)]
    model: ModelArgs,
    /// Write 0 for wall_time_s so that reruns are byte-identical.
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long = "L", default_value_t = 2048)]
    l: usize,
    #[arg(long = "Q", default_value_t = 2048)]
    q: usize,
    #[arg(long = "eps-l", default_value_t = 0.5)]
    eps_l: f64,
    #[arg(long = "eps-q", default_value_t = 0.1)]
    eps_q: f64,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long = "bag-size", default_value_t = 10)]
    bag_size: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long = "sigma-x", default_value_t = 1.0)]
    sigma_x: f64,
    #[arg(long = "sigma-xp", default_value_t = 1.0)]
    sigma_xp: f64,
    #[arg(long = "sigma-p", default_value_t = 1.0)]
    sigma_p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_axis(s: &str) -> Result<ParamAxis, String> {
    let (name, range) = s.split_once('=').ok_or("expected NAME=LOW:HIGH:COUNT")?;
    let param = match name.trim() {
        "sigma_x" => Param::SigmaX,
        "sigma_xp" => Param::SigmaXp,
        "sigma_p" => Param::SigmaP,
        "lambda" => Param::Lambda,
        other => return Err(format!("unknown parameter `{other}`")),
    };
    let parts: Vec<&str> = range.split(':').collect();
    let [low, high, count] = parts.as_slice() else {
        return Err("expected NAME=LOW:HIGH:COUNT".into());
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`"));
    let count: usize = count.trim().parse().map_err(|_| format!("bad count `{count}`"))?;
    Ok(ParamAxis::log(param, num(low)?, num(high)?, count))
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "mtl")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "rff")]
    trainer: TrainerArg,
    #[command(flatten)]
    model: ModelArgs,
    /// Grid axis `NAME=LOW:HIGH:COUNT` (log-spaced); repeatable. Without any,
    /// every applicable bandwidth and lambda is searched on the default grid.
    #[arg(long = "grid", value_parser = parse_axis)]
    grid: Vec<ParamAxis>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long = "cv-repeats", default_value_t = 5)]
    cv_repeats: usize,
    #[arg(long, default_value_t = 3)]
    recenter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score table CSV.
    #[arg(long)]
    scores: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Incompatible(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn create(path: &PathBuf) -> margokit::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_synth(a: SynthArgs) -> margokit::Result<()> {
    let (tasks, points) = (a.tasks as usize, a.points as usize);
    let coll = if a.regression {
        gen_regression_collection(tasks, points, a.seed)?
    } else {
        gen_collection_with(tasks, points, a.seed, a.a, a.b, "task")?
    };
    write_bags(&coll, &a.out)
}

fn cmd_train(a: TrainArgs) -> margokit::Result<()> {
    let coll = read_bags(&a.data)?;
    if !coll.is_labeled() {
        return Err(Error::MissingLabels(format!("{} has no y column", a.data.display())));
    }
    let labels: Vec<f64> = coll
        .bags()
        .iter()
        .flat_map(|b| b.labels().unwrap_or(&[]).iter().copied())
        .collect();
    let mut cfg = a.model.config(Some(&labels))?;
    cfg.approach = a.method.into();
    cfg.trainer = a.trainer.into();
    cfg.seed = a.seed;
    let model = train(coll.bags(), &cfg)?;
    save_model(&model, &a.out)
}

fn cmd_predict(a: PredictArgs) -> margokit::Result<()> {
    let model = load_model(&a.model)?;
    let coll = read_bags(&a.data)?;
    let mut out = create(&a.out)?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["task_id", "row", "margin", "sign"]).map_err(csv_err)?;
    for bag in coll.bags() {
        let preds = predict_points(&model, bag)?;
        for (i, t) in preds.iter().enumerate() {
            let sign = format!("{}", sign_label(*t) as i32);
            w.write_record([bag.task_id(), &i.to_string(), &format!("{t:?}"), &sign])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn cmd_eval(a: EvalArgs) -> margokit::Result<()> {
    let model = load_model(&a.model)?;
    let coll = read_bags(&a.data)?;
    if !coll.is_labeled() {
        return Err(Error::MissingLabels(format!("{} has no y column", a.data.display())));
    }
    let report = evaluate(&model, coll.bags())?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> margokit::Result<()> {
    let grid = ExperimentGrid {
        tasks: a.tasks,
        points: a.points,
        approaches: a.methods.into_iter().map(Approach::from).collect(),
        trainer: a.trainer.into(),
        repeats: a.repeats as usize,
        seed: a.seed,
        test_tasks: a.test_tasks,
        test_points: a.test_points,
        template: a.model.config(None)?,
        record_timing: !a.no_timing,
    };
    let out = create(&a.out)?;
    run_sweep(&grid, out)?;
    Ok(())
}

fn cmd_approx(a: ApproxArgs) -> margokit::Result<()> {
    let spec = KernelSpec::all_gaussian(a.sigma_x, a.sigma_xp, a.sigma_p)?;
    let cfg = ApproxConfig {
        l: a.l,
        q: a.q,
        n_pairs: a.pairs,
        n_repeats: a.repeats,
        bag_size: a.bag_size,
        dim: a.dim,
        eps_l: a.eps_l,
        eps_q: a.eps_q,
        seed: a.seed,
    };
    let report = approx_error_stats(&spec, &cfg)?;
    let mut out = create(&a.out)?;
    write_approx_report(&report, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_cv(a: CvArgs) -> margokit::Result<()> {
    let coll = read_bags(&a.data)?;
    if !coll.is_labeled() {
        return Err(Error::MissingLabels(format!("{} has no y column", a.data.display())));
    }
    let labels: Vec<f64> = coll
        .bags()
        .iter()
        .flat_map(|b| b.labels().unwrap_or(&[]).iter().copied())
        .collect();
    let mut template = a.model.config(Some(&labels))?;
    template.approach = a.method.into();
    template.trainer = a.trainer.into();
    template.seed = a.seed;
    let mut grid = if a.grid.is_empty() {
        let params: &[Param] = match template.approach {
            Approach::Mtl => &[Param::SigmaX, Param::SigmaXp, Param::SigmaP, Param::Lambda],
            Approach::Pooling => &[Param::SigmaX, Param::Lambda],
        };
        GridSpec::default_for(params)
    } else {
        GridSpec {
            axes: a.grid,
            ..GridSpec::default_for(&[])
        }
    };
    grid.folds = a.folds;
    grid.repeats = a.cv_repeats;
    grid.max_recenter = a.recenter;
    grid.seed = a.seed;
    let rounds = select_hyperparameters(coll.bags(), &template, &grid)?;
    let mut out = create(&a.scores)?;
    write_score_table(&rounds, &mut out)?;
    out.flush()?;

    let last = rounds.last().expect("at least one round");
    let best: serde_json::Map<String, serde_json::Value> = last
        .grid
        .axes
        .iter()
        .zip(last.best_values())
        .map(|(axis, &v)| (axis.param.name().to_owned(), serde_json::json!(v)))
        .collect();
    let summary = serde_json::json!({
        "best": best,
        "cv_risk": last.best_score(),
        "cv_error_rate": last.mean_error[last.best_index],
        "rounds": rounds.len(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Numerical(e.to_string()))?
    );
    Ok(())
}

fn configure_threads() {
    let Ok(v) = std::env::var("MARGOKIT_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("cannot configure thread pool: {e}");
            }
        }
        Err(_) => log::warn!("ignoring MARGOKIT_THREADS={v:?}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let result = match cli.cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::ApproxCheck(a) => cmd_approx(a),
        Cmd::Cv(a) => cmd_cv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
