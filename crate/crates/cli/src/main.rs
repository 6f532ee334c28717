use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use valueboost::eval::{cross_validate, evaluate_with, CvScore, ValueMode};
use valueboost::io::{
    fmt_g4, read_dataset_file, read_memberships, to_json_g17, write_benchmark, write_curves,
    write_dataset_file, write_null_draws, write_predictions, HorizonPolicy, RunConfigDoc,
};
use valueboost::simgen::SimMetadata;
use valueboost::{
    benchmark, boost_fit, classify, km_curve, permutation_test, predict_scores, simulate,
    variable_importance, weighted_survival_curve, Arm, BenchmarkRequest, BoostConfig, BoostedModel,
    CvGrid, Dataset, ErrorKind, MembershipState, Metrics, SimConfig, TimeHorizon,
};

#[derive(Parser)]
#[command(
    name = "valueboost",
    version,
    about = "Subgroup identification for two-arm survival trials by boosting an RMST value function",
    after_help = config_help()
)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trial and write it as CSV, with a `<out>.meta.json` sidecar.
    Simulate(SimulateArgs),
    /// Fit a model, optionally choosing hyperparameters by cross-validation.
    #[command(after_help = config_help())]
    Fit(FitArgs),
    /// Write logits, scores and memberships for a dataset.
    Predict(PredictArgs),
    /// Value and classification metrics of a model on a dataset.
    Eval(EvalArgs),
    /// Monte Carlo benchmark over simulated trials.
    #[command(after_help = config_help())]
    Benchmark(BenchmarkArgs),
    /// Survival curves of the arm x subgroup cells.
    Curves(CurvesArgs),
    /// Permutation test for a covariate-dependent treatment effect.
    #[command(after_help = config_help())]
    Permtest(PermtestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario, 1-6.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    scenario: u8,
    /// Prognostic setting: 1 (none) or 2 (four prognostic covariates).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    setting: u8,
    /// Number of patients.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run configuration; its `simulation` section is the template.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HorizonArgs {
    /// Restriction time t*: `auto` (smaller of the per-arm largest times) or months.
    /// Overrides the config's `horizon`.
    #[arg(long)]
    tstar: Option<HorizonPolicy>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Run configuration (JSON). Without it the defaults listed below apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Choose learning rate, depth and tree count by K-fold cross-validation
    /// over the config's `cv` grid.
    #[arg(long)]
    cv: bool,
    /// Seed for the cross-validation folds (overrides `cv.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Membership cutoff for the reported training value (overrides `cutoff`).
    #[arg(long, value_parser = open_unit)]
    cutoff: Option<f64>,
    #[command(flatten)]
    horizon: HorizonArgs,
    #[arg(long)]
    model_out: PathBuf,
    /// Fit report (default: `<model-out>.report.json`).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Membership is `score > cutoff`.
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    cutoff: f64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Hard,
    Soft,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5, value_parser = open_unit)]
    cutoff: f64,
    /// Memberships entering the value: classified (hard) or raw scores (soft).
    #[arg(long, value_enum, default_value = "hard")]
    value_mode: ModeArg,
    /// Restriction time t*: `auto` (computed on --data) or months.
    #[arg(long, default_value = "auto")]
    tstar: HorizonPolicy,
    /// Also write the metrics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Comma-separated scenarios.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6",
          value_parser = clap::value_parser!(u8).range(1..=6))]
    scenarios: Vec<u8>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    setting: u8,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 2000)]
    n_valid: usize,
    /// Run configuration; supplies the `cv` grid, `cutoff` and the
    /// `simulation` template.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV: one row per scenario, setting and metric.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    /// Weighted Nelson-Aalen, exp(-cumulative hazard).
    Na,
    /// Weighted Kaplan-Meier product limit.
    Km,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    data: PathBuf,
    /// CSV with a `membership` column, e.g. the output of `predict`
    /// (default: every patient in subgroup 1).
    #[arg(long)]
    memberships: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "na")]
    estimator: Estimator,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PermtestArgs {
    #[arg(long)]
    data: PathBuf,
    /// Run configuration; its `boost` section is fitted to every draw.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of permutations.
    #[arg(long = "B", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    permutations: u64,
    #[arg(long, default_value_t = 0.1, value_parser = open_unit)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = open_unit)]
    cutoff: Option<f64>,
    #[command(flatten)]
    horizon: HorizonArgs,
    /// CSV of null draws.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside the open interval (0, 1)"))
    }
}

fn config_help() -> String {
    let b = BoostConfig::default();
    let g = CvGrid::default();
    let s = SimConfig::default();
    format!(
        "Config defaults (JSON keys; unknown keys are rejected):\n  \
         boost: num_trees {}, learning_rate {}, max_depth {}, lambda_l2 {}, gamma_split {}, \
         hessian_const {}, min_child_weight {}, min_samples_leaf {}\n  \
         cv: learning_rates {:?}, max_depths {:?}, num_trees {:?}, folds {}, seed {}\n  \
         simulation: q {}, rho {:.6}, beta0 {:.6}, sigma0 {}, enrollment_months {}, \
         followup_months {}, yearly_dropout {}\n  \
         horizon auto, cutoff 0.5, seed 0",
        b.num_trees,
        b.learning_rate,
        b.max_depth,
        b.lambda_l2,
        b.gamma_split,
        b.hessian_const,
        b.min_child_weight,
        b.min_samples_leaf,
        g.learning_rates,
        g.max_depths,
        g.num_trees,
        g.folds,
        g.seed,
        s.q,
        s.rho,
        s.beta0,
        s.sigma0,
        s.enrollment_months,
        s.followup_months,
        s.yearly_dropout,
    )
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfigDoc> {
    match path {
        Some(p) => RunConfigDoc::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfigDoc::default()),
    }
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    read_dataset_file(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<BoostedModel> {
    BoostedModel::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_features(model: &BoostedModel, data: &Dataset) -> anyhow::Result<()> {
    if model.feature_names != data.feature_names() {
        bail!(valueboost::Error::Format(format!(
            "dataset features {:?} do not match the model's {:?}",
            data.feature_names(),
            model.feature_names
        )));
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let doc = load_config(a.config.as_deref())?;
    let config = SimConfig {
        scenario: a.scenario,
        setting: a.setting,
        n: a.n,
        seed: a.seed,
        ..doc.simulation
    };
    let data = simulate(&config)?;
    write_dataset_file(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut meta = a.out.clone().into_os_string();
    meta.push(".meta.json");
    std::fs::write(&meta, to_json_g17(&SimMetadata::new(&config))?)?;
    Ok(())
}

#[derive(Serialize)]
struct ImportanceRow {
    feature: String,
    gain: f64,
    rank: f64,
}

#[derive(Serialize)]
struct FitReport {
    selected: BoostConfig,
    t_star: f64,
    cutoff: f64,
    /// Training `-V` before the first tree and after each tree.
    training_loss: Vec<f64>,
    /// Per-patient training value with classified memberships.
    training_value_hat: f64,
    importance: Vec<ImportanceRow>,
    cv_scores: Option<Vec<CvScore>>,
}

fn importance_rows(model: &BoostedModel) -> anyhow::Result<Vec<ImportanceRow>> {
    if model.trees.is_empty() {
        return Ok(Vec::new());
    }
    let imp = variable_importance(model)?;
    let mut rows: Vec<ImportanceRow> = imp
        .feature_names
        .iter()
        .zip(imp.gain.iter().zip(&imp.rank))
        .map(|(f, (&gain, &rank))| ImportanceRow {
            feature: f.clone(),
            gain,
            rank,
        })
        .collect();
    rows.sort_by(|a, b| a.rank.total_cmp(&b.rank));
    Ok(rows)
}

fn cmd_fit(a: FitArgs) -> anyhow::Result<()> {
    let doc = load_config(a.config.as_deref())?;
    let data = load_data(&a.data)?;
    let horizon = a.horizon.tstar.unwrap_or(doc.horizon).resolve(&data)?;
    let cutoff = a.cutoff.unwrap_or(doc.cutoff);
    let (config, cv_scores) = if a.cv {
        let grid = CvGrid {
            seed: a.seed.unwrap_or(doc.cv.seed),
            cutoff,
            ..doc.cv.clone()
        };
        let outcome = cross_validate(&data, &grid, horizon)?;
        (outcome.best, Some(outcome.scores))
    } else {
        (doc.boost, None)
    };
    let model = boost_fit(&data, &config, horizon)?;
    let members = classify(&predict_scores(&model, data.covariates())?, cutoff)?;
    let metrics =
        valueboost::eval::metrics_for(&data, &MembershipState::from_hard(&members), &members, horizon)?;
    let report = FitReport {
        selected: config,
        t_star: horizon.t_star(),
        cutoff,
        training_loss: model.training_loss.clone(),
        training_value_hat: metrics.value_hat,
        importance: importance_rows(&model)?,
        cv_scores,
    };
    model
        .save(&a.model_out)
        .with_context(|| format!("writing {}", a.model_out.display()))?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut p = a.model_out.clone().into_os_string();
        p.push(".report.json");
        p.into()
    });
    std::fs::write(&report_path, to_json_g17(&report)?)?;

    println!("trees        {}", model.trees.len());
    println!("learning rate {}", fmt_g4(config.learning_rate));
    println!("max depth    {}", config.max_depth);
    println!("t*           {}", fmt_g4(horizon.t_star()));
    println!("training V/n {}", fmt_g4(metrics.value_hat));
    for row in report.importance.iter().take(5) {
        println!("  {:<8} gain {:<10} rank {}", row.feature, fmt_g4(row.gain), fmt_g4(row.rank));
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    check_features(&model, &data)?;
    let state = predict_scores(&model, data.covariates())?;
    let members = classify(&state, a.cutoff)?;
    let mut out = writer(a.out.as_deref())?;
    write_predictions(&state, &members, &mut out)?;
    out.flush()?;
    Ok(())
}

fn print_metrics(m: &Metrics) {
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_g4);
    println!("value_hat   {}", fmt_g4(m.value_hat));
    println!("accuracy    {}", opt(m.accuracy));
    println!("sensitivity {}", opt(m.sensitivity));
    println!("specificity {}", opt(m.specificity));
    println!("s1_rank     {}", opt(m.s1_rank));
    println!("s2_rank     {}", opt(m.s2_rank));
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    check_features(&model, &data)?;
    let horizon = a.tstar.resolve(&data)?;
    let mode = match a.value_mode {
        ModeArg::Hard => ValueMode::Hard,
        ModeArg::Soft => ValueMode::Soft,
    };
    let mut m = evaluate_with(&model, &data, a.cutoff, horizon, mode)?;
    if !model.trees.is_empty() {
        let imp = variable_importance(&model)?;
        m.s1_rank = imp.rank_of("S1");
        m.s2_rank = imp.rank_of("S2");
    }
    print_metrics(&m);
    if let Some(p) = &a.out {
        std::fs::write(p, to_json_g17(&m)?)?;
    }
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> anyhow::Result<()> {
    let doc = load_config(a.config.as_deref())?;
    let req = BenchmarkRequest {
        scenarios: a.scenarios,
        setting: a.setting,
        replicates: a.replicates,
        n_train: a.n_train,
        n_valid: a.n_valid,
        grid: doc.cv,
        cutoff: doc.cutoff,
        seed: a.seed,
        sim: doc.simulation,
    };
    let report = benchmark(&req)?;
    let mut out = writer(Some(&a.out))?;
    write_benchmark(&report, &mut out)?;
    out.flush()?;

    println!(
        "{} replicate(s) per scenario, setting {}, {} s",
        report.replicate_count,
        req.setting,
        fmt_g4(report.wall_time_secs)
    );
    for cell in &report.cells {
        let line: Vec<String> = cell
            .summary
            .iter()
            .map(|s| format!("{} {} ({})", s.metric, fmt_g4(s.mean), fmt_g4(s.sd)))
            .collect();
        println!("scenario {}: {}", cell.scenario, line.join(", "));
    }
    Ok(())
}

fn cmd_curves(a: CurvesArgs) -> anyhow::Result<()> {
    let data = load_data(&a.data)?;
    let members = match &a.memberships {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("reading {}", p.display()))?;
            let m = read_memberships(f)?;
            if m.len() != data.len() {
                bail!(valueboost::Error::DimensionMismatch {
                    what: "memberships",
                    got: m.len(),
                    expected: data.len(),
                });
            }
            m
        }
        None => vec![true; data.len()],
    };
    let mut curves = Vec::new();
    for group in [true, false] {
        let weights: Vec<f64> = members.iter().map(|&m| f64::from(u8::from(m == group))).collect();
        for arm in Arm::BOTH {
            let present = data
                .observations()
                .iter()
                .zip(&weights)
                .any(|(o, &w)| o.arm == arm && w > 0.0);
            if !present {
                continue;
            }
            let curve = match a.estimator {
                Estimator::Na => weighted_survival_curve(&data, &weights, arm)?,
                Estimator::Km => km_curve(&data, &weights, arm)?,
            };
            curves.push((group, arm, curve));
        }
    }
    let mut out = writer(a.out.as_deref())?;
    write_curves(&curves, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_permtest(a: PermtestArgs) -> anyhow::Result<()> {
    let doc = load_config(a.config.as_deref())?;
    let data = load_data(&a.data)?;
    let horizon: TimeHorizon = a.horizon.tstar.unwrap_or(doc.horizon).resolve(&data)?;
    let cutoff = a.cutoff.unwrap_or(doc.cutoff);
    let result = permutation_test(
        &data,
        &doc.boost,
        horizon,
        a.permutations as usize,
        a.alpha,
        a.seed,
        cutoff,
    )?;
    if let Some(p) = &a.out {
        let mut out = writer(Some(p))?;
        write_null_draws(&result, &mut out)?;
        out.flush()?;
    }
    println!("observed V    {}", fmt_g4(result.observed_value));
    println!("null quantile {}", fmt_g4(result.null_quantile));
    println!("p-value       {}", fmt_g4(result.p_value));
    println!("reject        {}", result.reject);
    Ok(())
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Permtest(a) => cmd_permtest(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<valueboost::Error>())
        .map_or(2, |e| match e.kind() {
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        })
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    let pipe = |e: &std::io::Error| e.kind() == std::io::ErrorKind::BrokenPipe;
    err.chain().any(|c| {
        if let Some(e) = c.downcast_ref::<std::io::Error>() {
            return pipe(e);
        }
        // transparent wrappers hide the io error from `chain()`
        c.downcast_ref::<valueboost::Error>().is_some_and(valueboost::Error::is_broken_pipe)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.threads {
        Some(t) => valueboost::par::with_threads(usize::from(t), || run(cli.command)),
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // Reader went away (`| head`); nothing left to report.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
