//! Command-line front end. Every configuration key can come from a flat TOML
//! file or a flag of the same name; flags win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoSSeries, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::experiment::{lhs_design, synth_generate, Design, IcRanges, TruthGenerator};
use crate::fos_models::ModelKind;
use crate::gp_emulator::{InitialConditions, DEFAULT_NUGGET};
use crate::inference::{diagnostics, sample_posterior, Algorithm, ChainConfig, DiagnosticsReport, FitData, Posterior};
use crate::io::{self, FittedModelArchive};
use crate::prediction::{grid, posterior_fos, predict_out_of_sample, predicted_ttf, Coverage, PredictOptions, PredictionBand};
use crate::scoring::{compare_models, score_run, BoxSummary, RunScore};

pub const ENV_OUT_DIR: &str = "FOSEMU_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DataValidation(_) | Error::UnknownRun(_) | Error::Format(_) | Error::Io { .. } => EXIT_DATA,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        Error::InvalidParameter(_) | Error::IndexOutOfRange(_) | Error::DimensionMismatch(_) => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fosemu", version, about = "Emulate factor-of-safety deterioration curves")]
pub struct Cli {
    /// Flat TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $FOSEMU_OUT_DIR or the current directory).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sampling and prediction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Latin hypercube design over the initial-condition box.
    Design(DesignArgs),
    /// Synthetic series for a design.
    Simulate(SimulateArgs),
    /// Fit a model by MCMC.
    Fit(FitArgs),
    /// Convergence diagnostics of a fit.
    Diagnose(ArchiveArgs),
    /// Posterior bands and time to failure for fitted or new inputs.
    Predict(PredictArgs),
    /// Predict held-out runs and report band coverage and scores.
    Validate(ValidateArgs),
    /// Summarise or compare score files.
    Score(ScoreArgs),
    /// Band, time-to-failure and SVG files for plotting.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Existing design; a new one of size `--n` is generated otherwise.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curve family of the synthetic truth.
    #[arg(long)]
    pub truth_model: Option<ModelKind>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub init_step: Option<f64>,
    #[arg(long)]
    pub nugget: Option<f64>,
    /// Run ids left out of the fit.
    #[arg(long, value_delimiter = ',')]
    pub holdout: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
pub struct ArchiveArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub grid_end: Option<f64>,
    #[arg(long)]
    pub max_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write per-draw curves.
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Fitted run ids to predict.
    #[arg(long, value_delimiter = ',')]
    pub run: Vec<u32>,
    /// New initial conditions: height,angle,cohesion,friction,permeability.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ics: Option<Vec<f64>>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    pub holdout: Option<Vec<u32>>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Score file of the quadratic model.
    #[arg(long)]
    pub quad: PathBuf,
    /// Score file of the B-spline model.
    #[arg(long)]
    pub bspline: PathBuf,
    /// Write paired per-time differences.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub archive: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub run: Vec<u32>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write SVG line plots.
    #[arg(long)]
    pub svg: bool,
}

/// Keys accepted in the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub design: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    pub horizon: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub truth_model: Option<ModelKind>,
    pub model: Option<ModelKind>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub warmup: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub target_accept: Option<f64>,
    pub max_depth: Option<usize>,
    pub init_step: Option<f64>,
    pub nugget: Option<f64>,
    pub holdout: Option<Vec<u32>>,
    pub step: Option<f64>,
    pub grid_end: Option<f64>,
    pub max_draws: Option<usize>,
    pub curves: Option<bool>,
    pub svg: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

struct Ctx {
    cfg: RunConfig,
    out_dir: PathBuf,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn path(&self, flag: &Option<PathBuf>, file: &Option<PathBuf>, what: &str, problems: &mut Vec<String>) -> PathBuf {
        match flag.clone().or_else(|| file.clone()) {
            Some(p) if p.exists() => p,
            Some(p) => {
                problems.push(format!("{what} file {} does not exist", p.display()));
                p
            }
            None => {
                problems.push(format!("no {what} file given"));
                PathBuf::new()
            }
        }
    }

    fn archive(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        let mut problems = Vec::new();
        let p = self.path(flag, &self.cfg.archive, "archive", &mut problems);
        finish(problems)?;
        Ok(p)
    }

    fn dataset(&self, a: &DataArgs) -> Result<Dataset> {
        let mut problems = Vec::new();
        let d = self.path(&a.design, &self.cfg.design, "design", &mut problems);
        let s = self.path(&a.series, &self.cfg.series, "series", &mut problems);
        finish(problems)?;
        io::read_dataset(&d, &s, a.horizon.or(self.cfg.horizon).unwrap_or(DEFAULT_HORIZON))
    }

    fn predict_options(&self, g: &GridArgs) -> PredictOptions {
        PredictOptions {
            seed: g.seed.or(self.cfg.seed).unwrap_or(1),
            max_draws: g.max_draws.or(self.cfg.max_draws),
            keep_curves: g.curves || self.cfg.curves.unwrap_or(false),
            step: g.step.or(self.cfg.step).unwrap_or(crate::prediction::DEFAULT_STEP),
        }
    }

    fn grid(&self, g: &GridArgs) -> Result<Vec<f64>> {
        let end = g.grid_end.or(self.cfg.grid_end).unwrap_or(DEFAULT_HORIZON);
        grid(0.0, end, g.step.or(self.cfg.step).unwrap_or(1.0))
    }
}

fn finish(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::DataValidation(problems))
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("FOSEMU_LOG").try_init();
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(ENV_OUT_DIR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Some(t) = cli.threads.or(cfg.threads) {
        if t == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    let ctx = Ctx { cfg, out_dir };
    match cli.command {
        Command::Design(a) => cmd_design(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Diagnose(a) => cmd_diagnose(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
        Command::Score(a) => cmd_score(&ctx, a),
        Command::Plotdata(a) => cmd_plotdata(&ctx, a),
    }
}

fn cmd_design(ctx: &Ctx, a: DesignArgs) -> Result<()> {
    let n = a.n.or(ctx.cfg.n).unwrap_or(75);
    let seed = a.seed.or(ctx.cfg.seed).unwrap_or(1);
    let d = lhs_design(n, &IcRanges::table1(), seed)?;
    let p = ctx.out("design.csv");
    io::write_design(&p, &d.pairs())?;
    println!("wrote {} design points to {}", d.len(), p.display());
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let seed = a.seed.or(ctx.cfg.seed).unwrap_or(1);
    let horizon = a.horizon.or(ctx.cfg.horizon).unwrap_or(DEFAULT_HORIZON);
    let design = match a.design.or_else(|| ctx.cfg.design.clone()) {
        Some(p) => {
            let pairs = io::read_design(&p)?;
            Design {
                run_ids: pairs.iter().map(|p| p.0).collect(),
                points: pairs.iter().map(|p| p.1).collect(),
                seed,
                ranges: IcRanges::table1(),
            }
        }
        None => lhs_design(a.n.or(ctx.cfg.n).unwrap_or(75), &IcRanges::table1(), seed)?,
    };
    let generator = match a.truth_model.or(ctx.cfg.truth_model).unwrap_or(ModelKind::BSpline) {
        ModelKind::BSpline => TruthGenerator::two_regime(),
        ModelKind::Quadratic => TruthGenerator::quadratic(),
    };
    let (data, truth) = synth_generate(&design, &generator, horizon, seed)?;
    io::write_design(&ctx.out("design.csv"), &design.pairs())?;
    let series: Vec<FoSSeries> = data.runs.iter().map(|r| r.series.clone()).collect();
    io::write_series(&ctx.out("series.csv"), &series)?;
    io::write_json(&ctx.out("truth.json"), &truth)?;
    let censored = series.iter().filter(|s| s.censored).count();
    println!(
        "simulated {} runs ({censored} censored at {horizon} years, {} dropped with too few observations)",
        data.len(),
        truth.dropped.len()
    );
    if !truth.dropped.is_empty() {
        let ids: Vec<String> = truth.dropped.iter().map(u32::to_string).collect();
        println!("dropped runs: {}", ids.join(","));
    }
    Ok(())
}

fn chain_config(ctx: &Ctx, a: &FitArgs) -> ChainConfig {
    let d = ChainConfig::default();
    let c = &ctx.cfg;
    ChainConfig {
        chains: a.chains.or(c.chains).unwrap_or(d.chains),
        iterations: a.iterations.or(c.iterations).unwrap_or(d.iterations),
        warmup: a.warmup.or(c.warmup).unwrap_or(d.warmup),
        seed: a.seed.or(c.seed).unwrap_or(d.seed),
        algorithm: a.algorithm.or(c.algorithm).unwrap_or(d.algorithm),
        target_accept: a.target_accept.or(c.target_accept).unwrap_or(d.target_accept),
        max_depth: a.max_depth.or(c.max_depth).unwrap_or(d.max_depth),
        init_step: a.init_step.or(c.init_step).unwrap_or(d.init_step),
        threads: None,
    }
}

#[derive(Serialize)]
struct FitSummary<'a> {
    model: ModelKind,
    n_runs: usize,
    run_ids: &'a [u32],
    config: &'a ChainConfig,
    diagnostics: &'a DiagnosticsReport,
}

fn cmd_fit(ctx: &Ctx, a: FitArgs) -> Result<()> {
    let model = a.model.or(ctx.cfg.model).unwrap_or(ModelKind::BSpline);
    let cfg = chain_config(ctx, &a);
    let nugget = a.nugget.or(ctx.cfg.nugget).unwrap_or(DEFAULT_NUGGET);
    let mut problems = Vec::new();
    if let Err(e) = cfg.validate() {
        problems.push(e.to_string());
    }
    if !(nugget >= 0.0) {
        problems.push(format!("nugget must be non-negative, got {nugget}"));
    }
    if !problems.is_empty() {
        return Err(Error::invalid(problems.join("; ")));
    }
    let data = ctx.dataset(&a.data)?;
    let holdout = a.holdout.or_else(|| ctx.cfg.holdout.clone()).unwrap_or_default();
    let (train, _) = data.split(&holdout)?;
    if train.is_empty() {
        return Err(Error::DataValidation(vec!["no runs left to fit".into()]));
    }
    let stats = train.standardization()?;
    let fd = FitData::from_dataset(&train, &stats)?;
    let post = Posterior::new(model, &fd, crate::gp_emulator::HyperPrior::elicited(), nugget)?;
    log::info!("fitting the {model} model to {} runs", train.len());
    let draws = sample_posterior(&post, &fd, &cfg)?;

    let draws_name = format!("{model}_draws.jsonl");
    let draws_path = ctx.out(&draws_name);
    io::write_draws(&draws_path, &draws)?;
    let report = diagnostics(&draws);
    let run_ids = train.run_ids();
    io::write_json(
        &ctx.out(&format!("{model}_summary.json")),
        &FitSummary {
            model,
            n_runs: train.len(),
            run_ids: &run_ids,
            config: &cfg,
            diagnostics: &report,
        },
    )?;
    let archive = FittedModelArchive {
        version: env!("CARGO_PKG_VERSION").to_string(),
        model,
        nugget,
        warmup: cfg.warmup,
        chains: cfg.clone(),
        run_ids,
        fingerprint: FittedModelArchive::data_fingerprint(&train, &stats),
        stats,
        training: train,
        chain_stats: draws.chain_stats().to_vec(),
        draws_path: draws_name,
        draws_sha256: io::sha256_file(&draws_path)?,
    };
    let ap = ctx.out(&format!("{model}_archive.json"));
    io::write_json(&ap, &archive)?;
    print_diagnostics(&report);
    println!("wrote {}", ap.display());
    Ok(())
}

fn print_diagnostics(r: &DiagnosticsReport) {
    println!(
        "{} chains x {} draws, {} divergences, {} max-depth hits, mean acceptance {:.3}",
        r.n_chains, r.n_draws, r.divergences, r.max_depth_hits, r.mean_accept
    );
    let hyper = r.max_rhat(|n| !n.contains('['));
    if let Some(h) = hyper {
        println!("max R-hat over tau: {h:.4}");
    }
    if let Some(m) = r.max_rhat(|_| true) {
        println!("max R-hat overall: {m:.4}");
    }
    if !r.flagged.is_empty() {
        println!("R-hat above threshold: {}", r.flagged.join(", "));
    }
    if !r.multimodal.is_empty() {
        println!("possible multimodality: {}", r.multimodal.join(", "));
    }
}

fn cmd_diagnose(ctx: &Ctx, a: ArchiveArgs) -> Result<()> {
    let ap = ctx.archive(&a.archive)?;
    let (arch, draws) = FittedModelArchive::load(&ap)?;
    let report = diagnostics(&draws);
    print_diagnostics(&report);
    println!("{:<24} {:>12} {:>12} {:>8} {:>10} {:>10}", "parameter", "mean", "sd", "rhat", "ess_bulk", "ess_tail");
    for p in &report.params {
        let rhat = p.rhat.map_or("-".to_string(), |r| format!("{r:.4}"));
        println!(
            "{:<24} {:>12.5} {:>12.5} {:>8} {:>10.1} {:>10.1}",
            p.name, p.mean, p.sd, rhat, p.ess_bulk, p.ess_tail
        );
    }
    io::write_json(&ctx.out(&format!("{}_diagnostics.json", arch.model)), &report)
}

fn training_run(arch: &FittedModelArchive, id: u32) -> Result<&FoSSeries> {
    arch.training.run(id).map(|r| &r.series).ok_or(Error::UnknownRun(id))
}

fn cmd_predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    if let Some(v) = a.ics.as_ref().filter(|v| v.len() != 5) {
        return Err(Error::invalid(format!("--ics needs 5 values, got {}", v.len())));
    }
    let ap = ctx.archive(&a.archive)?;
    if a.run.is_empty() && a.ics.is_none() {
        return Err(Error::invalid("give --run ids and/or --ics"));
    }
    let (arch, draws) = FittedModelArchive::load(&ap)?;
    let unknown: Vec<String> = a
        .run
        .iter()
        .filter(|id| !arch.run_ids.contains(id))
        .map(|id| format!("run {id} is not in the fit"))
        .collect();
    finish(unknown)?;
    let g = ctx.grid(&a.grid)?;
    let mut opts = ctx.predict_options(&a.grid);
    let write_curves = opts.keep_curves;
    opts.keep_curves = true;
    let model = arch.model;
    let mut scores = Vec::new();
    for &id in &a.run {
        let band = posterior_fos(&draws, id, &g, &opts)?;
        let ttf = predicted_ttf(&draws, id, &opts)?;
        io::write_band(&ctx.out(&format!("band_{model}_run{id}.csv")), &band)?;
        io::write_ttf(&ctx.out(&format!("ttf_{model}_run{id}.json")), &ttf)?;
        if write_curves {
            io::write_curves(&ctx.out(&format!("curves_{model}_run{id}.csv")), &band)?;
        }
        scores.push(score_run(&band, training_run(&arch, id)?)?);
        let s = ttf.summary();
        println!(
            "run {id}: predicted TTF median {:.1} years (95% {:.1} to {:.1})",
            s.rho_q50, s.rho_q025, s.rho_q975
        );
    }
    if !scores.is_empty() {
        io::write_scores(&ctx.out(&format!("scores_{model}.csv")), &scores)?;
    }
    if let Some(v) = &a.ics {
        let x = InitialConditions::new(v[0], v[1], v[2], v[3], v[4]);
        if !x.is_finite() {
            return Err(Error::invalid("initial conditions must be finite"));
        }
        let res = predict_out_of_sample(&draws, &arch.training_ics(), &arch.stats, &x, &g, &opts)?;
        io::write_band(&ctx.out(&format!("band_{model}_new.csv")), &res.band)?;
        io::write_ttf(&ctx.out(&format!("ttf_{model}_new.json")), &res.ttf)?;
        if write_curves {
            io::write_curves(&ctx.out(&format!("curves_{model}_new.csv")), &res.band)?;
        }
        let s = res.ttf.summary();
        println!(
            "new input: predicted TTF median {:.1} years (95% {:.1} to {:.1}), {} draws skipped",
            s.rho_q50, s.rho_q025, s.rho_q975, res.skipped
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model: ModelKind,
    pub runs: Vec<RunCoverage>,
    pub total: Coverage,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCoverage {
    pub run_id: u32,
    pub coverage: Coverage,
    pub skipped_draws: usize,
}

fn cmd_validate(ctx: &Ctx, a: ValidateArgs) -> Result<()> {
    let ap = ctx.archive(&a.archive)?;
    let data = ctx.dataset(&a.data)?;
    let holdout = a.holdout.or_else(|| ctx.cfg.holdout.clone()).unwrap_or_default();
    if holdout.is_empty() {
        return Err(Error::invalid("no held-out run ids given"));
    }
    let (arch, draws) = FittedModelArchive::load(&ap)?;
    let (_, held) = data.split(&holdout)?;
    let overlap: Vec<String> = holdout
        .iter()
        .filter(|id| arch.run_ids.contains(id))
        .map(|id| format!("held-out run {id} was used in the fit"))
        .collect();
    finish(overlap)?;
    let g = ctx.grid(&a.grid)?;
    let mut opts = ctx.predict_options(&a.grid);
    let write_curves = opts.keep_curves;
    opts.keep_curves = true;
    let model = arch.model;
    let training = arch.training_ics();
    let mut runs = Vec::new();
    let mut scores = Vec::new();
    let mut total = Coverage::default();
    for r in &held.runs {
        let res = predict_out_of_sample(&draws, &training, &arch.stats, &r.ics, &g, &opts)?;
        let id = r.run_id;
        io::write_band(&ctx.out(&format!("band_{model}_heldout{id}.csv")), &res.band)?;
        io::write_ttf(&ctx.out(&format!("ttf_{model}_heldout{id}.json")), &res.ttf)?;
        if write_curves {
            io::write_curves(&ctx.out(&format!("curves_{model}_heldout{id}.csv")), &res.band)?;
        }
        let c = res.band.coverage(&r.series);
        total = total.add(c);
        scores.push(score_run(&res.band, &r.series)?);
        runs.push(RunCoverage {
            run_id: id,
            coverage: c,
            skipped_draws: res.skipped,
        });
        println!("held-out run {id}: {}/{} observations inside the 95% band", c.inside, c.total);
    }
    let report = CoverageReport {
        model,
        runs,
        total,
        fraction: total.fraction(),
    };
    io::write_json(&ctx.out(&format!("{model}_coverage.json")), &report)?;
    io::write_scores(&ctx.out(&format!("scores_{model}_validation.csv")), &scores)?;
    println!("overall coverage {:.3}", report.fraction);
    Ok(())
}

#[derive(Serialize)]
struct ModelScoreSummary {
    runs: usize,
    mean_mse: f64,
    mean_crps: f64,
}

fn summarise(scores: &[RunScore]) -> ModelScoreSummary {
    let se: Vec<f64> = scores.iter().flat_map(|s| s.se.iter().copied()).collect();
    let crps: Vec<f64> = scores.iter().flat_map(|s| s.crps.iter().copied()).collect();
    ModelScoreSummary {
        runs: scores.len(),
        mean_mse: crate::stats::mean(&se),
        mean_crps: crate::stats::mean(&crps),
    }
}

#[derive(Serialize)]
struct ScoreSummary {
    quadratic: ModelScoreSummary,
    bspline: ModelScoreSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_run_d_crps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_crps_box: Option<BoxSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_mse_box: Option<BoxSummary>,
}

fn cmd_score(ctx: &Ctx, a: ScoreArgs) -> Result<()> {
    let mut problems = Vec::new();
    for p in [&a.quad, &a.bspline] {
        if !p.exists() {
            problems.push(format!("score file {} does not exist", p.display()));
        }
    }
    finish(problems)?;
    let q = io::read_scores(&a.quad)?;
    let b = io::read_scores(&a.bspline)?;
    let mut summary = ScoreSummary {
        quadratic: summarise(&q),
        bspline: summarise(&b),
        median_run_d_crps: None,
        d_crps_box: None,
        d_mse_box: None,
    };
    if a.paired {
        let table = compare_models(&q, &b)?;
        io::write_score_table(&ctx.out("score_table.csv"), &table)?;
        let dc: Vec<f64> = table.rows.iter().map(|r| r.d_crps()).collect();
        let dm: Vec<f64> = table.rows.iter().map(|r| r.d_mse()).collect();
        summary.median_run_d_crps = Some(table.median_run_d_crps());
        summary.d_crps_box = Some(BoxSummary::new(&dc)?);
        summary.d_mse_box = Some(BoxSummary::new(&dm)?);
        let rows = table.runs.iter().map(|r| {
            vec![
                r.run_id.to_string(),
                io::fmt_real(r.d_crps.q1),
                io::fmt_real(r.d_crps.median),
                io::fmt_real(r.d_crps.q3),
                io::fmt_real(r.d_crps.lower_whisker),
                io::fmt_real(r.d_crps.upper_whisker),
            ]
        });
        write_rows(
            &ctx.out("score_boxes.csv"),
            &["run_id", "q1", "median", "q3", "lower_whisker", "upper_whisker"],
            rows,
        )?;
        println!("median per-run crps difference (quadratic - bspline): {:.6}", table.median_run_d_crps());
    }
    io::write_json(&ctx.out("score_summary.json"), &summary)?;
    println!(
        "mean crps: quadratic {:.6}, bspline {:.6}",
        summary.quadratic.mean_crps, summary.bspline.mean_crps
    );
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_plotdata(ctx: &Ctx, a: PlotArgs) -> Result<()> {
    let ap = ctx.archive(&a.archive)?;
    let (arch, draws) = FittedModelArchive::load(&ap)?;
    let ids = if a.run.is_empty() { arch.run_ids.clone() } else { a.run.clone() };
    let unknown: Vec<String> = ids
        .iter()
        .filter(|id| !arch.run_ids.contains(id))
        .map(|id| format!("run {id} is not in the fit"))
        .collect();
    finish(unknown)?;
    let g = ctx.grid(&a.grid)?;
    let opts = ctx.predict_options(&a.grid);
    let svg = a.svg || ctx.cfg.svg.unwrap_or(false);
    let model = arch.model;
    for id in ids {
        let band = posterior_fos(&draws, id, &g, &opts)?;
        let ttf = predicted_ttf(&draws, id, &opts)?;
        io::write_band(&ctx.out(&format!("plot_band_{model}_run{id}.csv")), &band)?;
        io::write_ttf_csv(&ctx.out(&format!("plot_ttf_{model}_run{id}.csv")), &ttf)?;
        if svg {
            let obs = training_run(&arch, id)?;
            let text = svg_band(&band, Some(obs), &format!("{model} model, run {id}"));
            let p = ctx.out(&format!("plot_{model}_run{id}.svg"));
            std::fs::write(&p, text).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
        }
    }
    Ok(())
}

/// FoS against years: posterior mean solid, 95% bounds dashed, observations
/// as points and the failure line `FoS = 1` dotted.
pub fn svg_band(band: &PredictionBand, obs: Option<&FoSSeries>, title: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let x_max = band.grid.last().copied().unwrap_or(1.0).max(1.0);
    let mut y_lo = band.lo95.iter().copied().fold(1.0f64, f64::min);
    let mut y_hi = band.hi95.iter().copied().fold(1.0f64, f64::max);
    if let Some(s) = obs {
        y_lo = s.fos.iter().copied().fold(y_lo, f64::min);
        y_hi = s.fos.iter().copied().fold(y_hi, f64::max);
    }
    let pad = 0.05 * (y_hi - y_lo).max(1e-6);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let sx = |x: f64| m + (x / x_max) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y_lo) / (y_hi - y_lo) * (h - 2.0 * m);
    let line = |ys: &[f64]| -> String {
        band.grid
            .iter()
            .zip(ys)
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{0}" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">years</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">FoS</text>"#, h / 2.0, h / 2.0);
    for k in 0..=4 {
        let x = x_max * k as f64 / 4.0;
        let y = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{x:.0}</text>"#, sx(x), h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.2}</text>"#, m - 4.0, sy(y) + 4.0);
    }
    if (y_lo..=y_hi).contains(&1.0) {
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="grey" stroke-dasharray="2,3"/>"#,
            sy(1.0),
            w - m
        );
    }
    for ys in [&band.lo95, &band.hi95] {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="firebrick" stroke-dasharray="6,4"/>"#, line(ys));
    }
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="firebrick" stroke-width="2"/>"#, line(&band.mean));
    if let Some(o) = obs {
        for (t, f) in o.times.iter().zip(&o.fos) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="black"/>"#, sx(*t), sy(*f));
        }
    }
    s.push_str("</svg>\n");
    s
}
