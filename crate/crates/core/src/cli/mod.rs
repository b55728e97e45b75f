//! Command-line front end: `select`, `tune` and `simulate`.
//!
//! Exit status is 0 on success, 2 for usage or input errors and 3 for
//! numerical failures.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::basis::{FamilyKind, Interval};
use crate::data::FunctionalDataset;
use crate::error::Error;
use crate::simulate::{generate, run_study, StudyReport};
use crate::tuning::{
    optimize_tuning, prepare_sample, run_pipeline, CvPoint, FoldPlan, PipelineOutcome,
};
use config::FileConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A command failure with its exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            },
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "funcsel",
    version,
    about = "Select functional predictors of a multivariate response"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "INT")]
    pub replications: Option<usize>,
    /// Basis family used for every predictor.
    #[arg(
        long,
        global = true,
        value_parser = PossibleValuesParser::new(["fourier", "bspline", "gaussian"])
            .map(|s| s.parse::<FamilyKind>().expect("listed value")),
    )]
    pub basis: Option<FamilyKind>,
    /// Largest basis dimension scanned by BIC.
    #[arg(long, global = true, value_name = "INT")]
    pub dmax: Option<usize>,
    #[arg(long, global = true, value_name = "INT")]
    pub folds: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune (α, β) on one half of the data and select on the other.
    Select,
    /// Run a Monte Carlo study on one of the built-in examples.
    Simulate(SimulateArgs),
    /// Write the cross-validation surface over the (α, β) grid.
    Tune,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Example number (1, 2 or 3).
    #[arg(long)]
    pub example: Option<u8>,
    /// Size of each generated sample.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Also write one generated sample as CSV files into this directory.
    #[arg(long, value_name = "DIR")]
    pub export: Option<PathBuf>,
}

impl Cli {
    /// The file configuration with flag overrides applied.
    pub fn resolve(&self) -> Result<FileConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.replications.is_some() {
            cfg.replications = self.replications;
        }
        if self.basis.is_some() {
            cfg.basis = self.basis;
            cfg.bases = None;
        }
        if self.dmax.is_some() {
            cfg.dmax = self.dmax;
        }
        if self.folds.is_some() {
            cfg.folds = self.folds;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if let Command::Simulate(args) = &self.command {
            let sim = cfg.simulate.get_or_insert_with(Default::default);
            if args.example.is_some() {
                sim.example = args.example;
            }
            if args.n.is_some() {
                sim.n = args.n;
            }
            if args.sigma.is_some() {
                sim.sigma = args.sigma;
            }
        }
        Ok(cfg)
    }
}

/// Parse `args`, run the command, report errors on stderr and return the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

/// Run the parsed command; returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = cli.resolve()?;
    match &cli.command {
        Command::Select => cmd_select(&cfg),
        Command::Tune => cmd_tune(&cfg),
        Command::Simulate(args) => cmd_simulate(&cfg, args.export.as_deref()),
    }
}

fn load_data(cfg: &FileConfig) -> Result<FunctionalDataset, Failure> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::usage("a [data] section with curves and responses is required"))?;
    if let Some(p) = data.predictors {
        if p != data.curves.len() {
            return Err(Failure::usage(format!(
                "config declares {p} predictors but lists {} curve files",
                data.curves.len()
            )));
        }
    }
    io::read_dataset(&data.curves, &data.responses)
}

fn grid_intervals(dataset: &FunctionalDataset) -> Result<Vec<Interval>, Failure> {
    dataset
        .predictors()
        .iter()
        .map(|p| {
            let g = p.grid();
            Interval::new(g[0], g[g.len() - 1]).map_err(Failure::from)
        })
        .collect()
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, Failure> {
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}

fn out_dir(cfg: &FileConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.out();
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    Ok(dir)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

/// One position of the final ranking.
#[derive(Debug, Serialize)]
pub struct RankEntry {
    pub position: usize,
    pub variable: usize,
    pub phi: f64,
    pub psi: f64,
}

/// Contents of `selection.json`; indices are 1-based.
#[derive(Debug, Serialize)]
pub struct SelectionReport {
    pub selected: Vec<usize>,
    pub d_hat: usize,
    pub alpha: f64,
    pub beta: f64,
    pub cv: f64,
    pub msep: f64,
    pub ranking: Vec<RankEntry>,
    pub training_dims: Vec<usize>,
    pub final_dims: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl SelectionReport {
    pub fn new(out: &PipelineOutcome, seed: u64) -> Self {
        let r = &out.result;
        Self {
            selected: r.selected.one_based(),
            d_hat: r.d_hat,
            alpha: out.alpha,
            beta: out.beta,
            cv: out.cv,
            msep: out.msep,
            ranking: r
                .ordered
                .iter()
                .enumerate()
                .map(|(pos, &v)| RankEntry {
                    position: pos + 1,
                    variable: v + 1,
                    phi: r.phi[v],
                    psi: r.psi[pos],
                })
                .collect(),
            training_dims: out.training_dims.clone(),
            final_dims: out.final_dims.clone(),
            folds: out.folds.v(),
            seed,
        }
    }
}

fn fmt_set(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `alpha,beta,cv` rows at full round-trip precision; failed points have an empty `cv`.
pub fn surface_csv(surface: &[CvPoint]) -> String {
    let mut s = String::from("alpha,beta,cv\n");
    for p in surface {
        let cv = p.cv.map(|v| format!("{v:?}")).unwrap_or_default();
        let _ = writeln!(s, "{:?},{:?},{cv}", p.alpha, p.beta);
    }
    s
}

pub fn cmd_select(cfg: &FileConfig) -> Result<Vec<PathBuf>, Failure> {
    let dataset = load_data(cfg)?;
    let pipeline = cfg.pipeline(&grid_intervals(&dataset)?)?;
    let outcome = run_pipeline(&dataset, &pipeline)?;
    let dir = out_dir(cfg)?;
    let report = SelectionReport::new(&outcome, pipeline.seed);
    eprintln!("selected: {}", fmt_set(&report.selected));
    Ok(vec![
        write(dir.join("selection.json"), &to_json(&report))?,
        write(dir.join("cv_surface.csv"), &surface_csv(&outcome.surface))?,
    ])
}

pub fn cmd_tune(cfg: &FileConfig) -> Result<Vec<PathBuf>, Failure> {
    let dataset = load_data(cfg)?;
    let pipeline = cfg.pipeline(&grid_intervals(&dataset)?)?;
    let prepared = prepare_sample(
        &dataset,
        &pipeline.templates,
        pipeline.d_max,
        pipeline.dimension_budget,
        pipeline.exec,
    )?;
    let folds = FoldPlan::shuffled(dataset.n(), pipeline.folds, pipeline.seed)?;
    let tuned = optimize_tuning(
        &prepared.design,
        &folds,
        &pipeline.grid,
        &pipeline.cv,
        pipeline.exec,
    )?;
    let dir = out_dir(cfg)?;
    let argmin = format!(
        "alpha,beta,cv\n{:?},{:?},{:?}\n",
        tuned.alpha, tuned.beta, tuned.cv
    );
    Ok(vec![
        write(dir.join("cv_surface.csv"), &surface_csv(&tuned.surface))?,
        write(dir.join("cv_argmin.csv"), &argmin)?,
    ])
}

/// `n,sigma,basis,CVP,FDR,MSIZE` with two decimals.
pub fn metrics_csv(report: &StudyReport) -> String {
    let mut s = String::from("n,sigma,basis,CVP,FDR,MSIZE\n");
    if let Some(m) = &report.metrics {
        let _ = writeln!(
            s,
            "{},{:.2},{},{:.2},{:.2},{:.2}",
            report.scenario.n, report.scenario.sigma, report.basis, m.cvp, m.fdr, m.msize
        );
    }
    s
}

/// One row per successful replication, full precision.
pub fn msep_csv(report: &StudyReport) -> String {
    let mut s = String::from("replication,msep,size,selected,alpha,beta\n");
    for o in &report.replications {
        if let Some(r) = &o.report {
            let _ = writeln!(
                s,
                "{},{:?},{},{},{:?},{:?}",
                o.index + 1,
                r.msep,
                r.size,
                fmt_set(&r.selected.one_based()),
                r.alpha,
                r.beta
            );
        }
    }
    s
}

pub fn cmd_simulate(cfg: &FileConfig, export: Option<&Path>) -> Result<Vec<PathBuf>, Failure> {
    let scenario = cfg.scenario()?;
    let p = scenario.example.p();
    let pipeline = cfg.pipeline(&vec![Interval::unit(); p])?;
    let mut written = Vec::new();
    if let Some(dir) = export {
        let sample = generate(&scenario)?;
        let (curves, y) = io::write_dataset(&sample.dataset, dir)?;
        written.extend(curves);
        written.push(y);
    }
    let report = run_study(&scenario, cfg.replications(), &pipeline)?;
    for o in &report.replications {
        if let Some(e) = &o.error {
            eprintln!("replication {} failed: {e}", o.index + 1);
        }
    }
    let dir = out_dir(cfg)?;
    written.push(write(dir.join("metrics.csv"), &metrics_csv(&report))?);
    written.push(write(dir.join("msep.csv"), &msep_csv(&report))?);
    written.push(write(dir.join("study.json"), &to_json(&report))?);
    if report.metrics.is_none() {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("all {} replications failed", report.replications.len()),
        });
    }
    Ok(written)
}
