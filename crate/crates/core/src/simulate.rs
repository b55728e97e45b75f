//! Monte Carlo scenarios and the coverage / false-discovery / model-size /
//! prediction-error metrics.
//!
//! Three generators are provided: a cosine-series process (p = 10, q = 1),
//! six parametric processes (p = 6, q = 1) and eight noisy parametric
//! processes with two responses (p = 8, q = 2). Responses follow the
//! functional linear model with integrals by the trapezoidal rule on the
//! observation grid.
//!
//! Randomness comes from ChaCha8 substreams keyed by
//! `(replication, sample role, curve)`, so a dataset is a pure function of
//! the seed and does not depend on thread count or evaluation order.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::basis::FamilyKind;
use crate::criterion::VariableSubset;
use crate::data::{FunctionalDataset, PredictorCurves};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tuning::{tune_and_select, PipelineConfig};

/// Default number of Monte Carlo replications.
pub const DEFAULT_REPLICATIONS: usize = 50;
/// Default grid size (`t_j = j / 50`).
pub const DEFAULT_GRID_POINTS: usize = 51;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl Example {
    pub fn p(self) -> usize {
        match self {
            Example::Ex1 => 10,
            Example::Ex2 => 6,
            Example::Ex3 => 8,
        }
    }

    pub fn q(self) -> usize {
        match self {
            Example::Ex3 => 2,
            _ => 1,
        }
    }

    /// Relevant predictors (0-based).
    pub fn true_set(self) -> VariableSubset {
        let one_based: &[usize] = match self {
            Example::Ex1 => &[1, 5, 6, 7, 10],
            Example::Ex2 => &[1, 2, 5],
            Example::Ex3 => &[3, 5, 7],
        };
        VariableSubset::from_one_based(one_based, self.p()).expect("static set")
    }

    pub fn number(self) -> u8 {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 => 2,
            Example::Ex3 => 3,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Example::Ex1),
            2 => Ok(Example::Ex2),
            3 => Ok(Example::Ex3),
            _ => Err(Error::argument(format!(
                "unknown example {k}; expected 1, 2 or 3"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub example: Example,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub grid_points: usize,
    /// When false, responses carry no additive error.
    pub noise: bool,
}

impl ScenarioSpec {
    pub fn new(example: Example, n: usize, sigma: f64, seed: u64) -> Result<Self> {
        let s = Self {
            example,
            n,
            sigma,
            seed,
            grid_points: DEFAULT_GRID_POINTS,
            noise: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::argument(format!(
                "sample size must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::argument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::argument("grid needs at least 2 points"));
        }
        Ok(())
    }

    /// Equispaced grid `t_j = j / (N - 1)` on `[0, 1]`.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.grid_points - 1) as f64;
        (0..self.grid_points).map(|j| j as f64 / last).collect()
    }
}

/// Which sample of a replication is being drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleRole {
    Training,
    Test,
    Single,
}

impl SampleRole {
    fn code(self) -> u64 {
        match self {
            SampleRole::Training => 1,
            SampleRole::Test => 2,
            SampleRole::Single => 3,
        }
    }
}

const NOISE_INDEX: u64 = 0xFFFF;

/// The substream assignment for one generated sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamPlan {
    pub seed: u64,
    pub curve_streams: Vec<u64>,
    pub noise_stream: u64,
}

impl StreamPlan {
    pub fn new(seed: u64, p: usize, replication: u64, role: SampleRole) -> Self {
        let base = (replication << 24) | (role.code() << 16);
        Self {
            seed,
            curve_streams: (0..p as u64).map(|l| base | l).collect(),
            noise_stream: base | NOISE_INDEX,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub dataset: FunctionalDataset,
    pub true_set: VariableSubset,
}

/// One sample (replication 0, single role).
pub fn generate(scenario: &ScenarioSpec) -> Result<GeneratedSample> {
    generate_sample(scenario, 0, SampleRole::Single)
}

pub fn generate_sample(
    scenario: &ScenarioSpec,
    replication: u64,
    role: SampleRole,
) -> Result<GeneratedSample> {
    let plan = StreamPlan::new(scenario.seed, scenario.example.p(), replication, role);
    generate_with_streams(scenario, &plan)
}

/// Draw a sample using an explicit stream assignment.
pub fn generate_with_streams(
    scenario: &ScenarioSpec,
    plan: &StreamPlan,
) -> Result<GeneratedSample> {
    scenario.validate()?;
    let ex = scenario.example;
    if plan.curve_streams.len() != ex.p() {
        return Err(Error::argument(format!(
            "stream plan has {} curve streams for {} predictors",
            plan.curve_streams.len(),
            ex.p()
        )));
    }
    let grid = scenario.grid();
    let n = scenario.n;
    let curves: Vec<Vec<Vec<f64>>> = (0..ex.p())
        .map(|l| {
            let mut rng = plan.rng(plan.curve_streams[l]);
            (0..n).map(|_| draw_curve(ex, l, &grid, &mut rng)).collect()
        })
        .collect();

    let weights: Vec<Vec<Vec<f64>>> = (0..ex.q())
        .map(|j| {
            (0..ex.p())
                .map(|l| grid.iter().map(|&t| coefficient(ex, j, l, t)).collect())
                .collect()
        })
        .collect();

    let mut noise_rng = plan.rng(plan.noise_stream);
    let eps = Normal::new(0.0, scenario.sigma).map_err(|e| Error::argument(e.to_string()))?;
    let mut y = DMatrix::zeros(n, ex.q());
    for i in 0..n {
        for j in 0..ex.q() {
            let mut v = 0.0;
            for l in 0..ex.p() {
                if weights[j][l].iter().any(|w| *w != 0.0) {
                    v += trapezoid_integral(&weights[j][l], &curves[l][i], &grid)?;
                }
            }
            let e: f64 = eps.sample(&mut noise_rng);
            y[(i, j)] = v + if scenario.noise { e } else { 0.0 };
        }
    }

    let predictors = curves
        .into_iter()
        .map(|c| PredictorCurves::new(grid.clone(), c))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedSample {
        dataset: FunctionalDataset::new(predictors, y)?,
        true_set: ex.true_set(),
    })
}

/// `N(mean, variance)`.
fn normal<R: Rng>(rng: &mut R, mean: f64, variance: f64) -> f64 {
    Normal::new(mean, variance.sqrt())
        .expect("valid normal")
        .sample(rng)
}

/// `U(a, b)` with the bounds put in order.
fn uniform<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Uniform::new(lo, hi).expect("valid uniform").sample(rng)
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn draw_curve<R: Rng>(ex: Example, l: usize, grid: &[f64], rng: &mut R) -> Vec<f64> {
    match ex {
        Example::Ex1 => {
            let coefs: Vec<f64> = (1..=50)
                .map(|k| normal(rng, 0.0, 1.0 / (k * k) as f64))
                .collect();
            grid.iter()
                .map(|&t| {
                    5.0 * coefs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| {
                            if k == 0 {
                                *c
                            } else {
                                c * SQRT_2 * (k as f64 * PI * t).cos()
                            }
                        })
                        .sum::<f64>()
                })
                .collect()
        }
        Example::Ex2 => ex2_curve(l, grid, rng),
        Example::Ex3 => {
            let u = ex3_curve(l, grid, rng);
            let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
            let var = 0.025 * (hi - lo);
            u.into_iter().map(|v| v + normal(rng, 0.0, var)).collect()
        }
    }
}

fn ex2_curve<R: Rng>(l: usize, grid: &[f64], rng: &mut R) -> Vec<f64> {
    match l {
        0 => {
            let a1 = normal(rng, -2.0, 1.0);
            let a2 = uniform(rng, 2.0, 3.0);
            let a3 = exp1(rng);
            let a4 = normal(rng, 0.0, 0.1);
            grid.iter()
                .map(|&t| a1 * t.powi(3) + a2 * t * t + a3 * t + a4)
                .collect()
        }
        1 => {
            let b1 = uniform(rng, 3.0, 7.0);
            let b2 = normal(rng, 0.0, 1.0);
            grid.iter()
                .map(|&t| b1 * (2.0 * PI * t / 3.0).sin() + b2 * t)
                .collect()
        }
        2 => {
            let c1 = normal(rng, -3.0, 1.2);
            let c2 = normal(rng, 2.0, 0.5);
            let c3 = normal(rng, -2.0, 1.0);
            let c4 = normal(rng, 2.0, 1.5);
            grid.iter()
                .map(|&t| {
                    let s = 2.0 * t - 1.0;
                    c1 * s.powi(3) + c2 * s * s + c3 * s + c4
                })
                .collect()
        }
        3 => {
            let d1 = uniform(rng, 2.0, 1.0);
            let d2 = normal(rng, 0.0, 1.0);
            let d3 = exp1(rng);
            grid.iter()
                .map(|&t| (t - d1).powi(2) * (2.0 * PI * t / 3.0).cos() + d2 * t + d3)
                .collect()
        }
        4 => {
            let e1 = normal(rng, -5.0, 3.0);
            let e2 = normal(rng, 7.0, 1.0);
            let e3 = normal(rng, 0.0, 0.025);
            grid.iter()
                .map(|&t| (2.0 * PI * (t - e1)).cos() + e2 * t + e3)
                .collect()
        }
        _ => {
            let f1 = normal(rng, -4.0, 2.0);
            let f2 = uniform(rng, 0.0, 1.0);
            let f3 = uniform(rng, 0.0, 0.5);
            let f4 = normal(rng, 0.0, 0.1);
            grid.iter()
                .map(|&t| {
                    f1 * t.powi(8) + (f2 * PI * t).cos() + t.powi(4) * (f3 * PI * t).sin() + f4
                })
                .collect()
        }
    }
}

fn ex3_curve<R: Rng>(l: usize, grid: &[f64], rng: &mut R) -> Vec<f64> {
    let pi2 = PI * PI;
    match l {
        0 => {
            let a1 = normal(rng, -3.0, 1.2);
            let a2 = normal(rng, 2.0, 0.5);
            let a3 = normal(rng, -2.0, 1.0);
            let a4 = normal(rng, 2.0, 1.5);
            grid.iter()
                .map(|&t| {
                    let s = 2.0 * t - 1.0;
                    a1 * s.powi(3) + a2 * s * s + a3 * s + a4
                })
                .collect()
        }
        1 => {
            let b1 = normal(rng, -4.0, 2.0);
            let b2 = uniform(rng, 0.0, 1.0);
            let b3 = uniform(rng, 0.0, 0.5);
            let b4 = normal(rng, 0.0, 0.1);
            grid.iter()
                .map(|&t| {
                    b1 * t.powi(8) + (b2 * PI * t).cos() + b3 * t.powi(4) * (b3 * PI * t).sin() + b4
                })
                .collect()
        }
        2 => {
            let c1 = normal(rng, -4.0, 3.0);
            let c2 = normal(rng, 7.0, 1.5);
            grid.iter()
                .map(|&t| c1 * (2.0 * PI * t).cos() + c2)
                .collect()
        }
        3 => {
            let d1 = uniform(rng, 3.0, 7.0);
            let d2 = normal(rng, 0.0, 1.0);
            grid.iter()
                .map(|&t| d1 * (pi2 * t / 3.0).sin() + d2)
                .collect()
        }
        4 => {
            let e1 = normal(rng, -3.0, 1.2);
            let e2 = normal(rng, 2.0, 0.5);
            let e3 = normal(rng, -2.0, 1.0);
            grid.iter()
                .map(|&t| {
                    let s = 2.0 * t - 1.0;
                    e1 * (3.0 * PI * s).cos().powi(3)
                        + e2 * (2.0 * PI * s).cos().powi(2)
                        + e3 * (PI * s).cos().powi(3)
                })
                .collect()
        }
        5 => {
            let f1 = normal(rng, -2.0, 1.0);
            let f2 = normal(rng, 3.0, 1.5);
            grid.iter()
                .map(|&t| f1 * (2.0 * pi2 * t / 3.0).sin() + f2 * (pi2 * t / 3.0).cos())
                .collect()
        }
        6 => {
            let g1 = uniform(rng, 2.0, 7.0);
            let g2 = normal(rng, 2.0, 0.4);
            grid.iter()
                .map(|&t| {
                    let s = 3.0 * t - 2.0;
                    g1 * (2.0 * PI * s).cos() + g2 * (PI * s).cos()
                })
                .collect()
        }
        _ => {
            let h1 = normal(rng, 4.0, 2.0);
            let h2 = normal(rng, -3.0, 0.5);
            let h3 = normal(rng, 1.0, 1.0);
            grid.iter()
                .map(|&t| {
                    let s = 2.0 * t - 1.0;
                    h1 * (PI * s).cos() + h2 * s + h3
                })
                .collect()
        }
    }
}

/// Coefficient function `B_{jℓ}(t)` (0-based `j`, `l`).
pub fn coefficient(ex: Example, j: usize, l: usize, t: f64) -> f64 {
    match ex {
        Example::Ex1 => {
            let b = match l {
                0 => 0.25,
                4 => 0.50,
                5 => 0.75,
                6 => 1.00,
                9 => 1.25,
                _ => return 0.0,
            };
            b * (PI * (l + 1) as f64 * t / 10.0).sin()
        }
        Example::Ex2 => match l {
            0 => t * (PI * t / 4.0).sin(),
            1 => (2.0 * PI * t).cos() + t * t + 1.0,
            4 => (-2.0 * t).exp() + t.powi(3) - 1.0,
            _ => 0.0,
        },
        Example::Ex3 => match (j, l) {
            (0, 2) => 0.25 * t.sin(),
            (0, 4) => 0.75 * (2.0 * t - 1.0).sin(),
            (0, 6) => 1.25 * (3.0 * t - 2.0).sin(),
            (1, 2) => 0.25 * t.cos(),
            (1, 4) => 0.75 * (2.0 * t - 1.0).cos() + (2.0 * t - 1.0).powi(2),
            (1, 6) => 1.25 * (3.0 * t - 2.0).cos() + (3.0 * t - 2.0).powi(4),
            _ => 0.0,
        },
    }
}

/// Trapezoidal approximation of `∫ f g dt` from values on `grid`.
pub fn trapezoid_integral(f: &[f64], g: &[f64], grid: &[f64]) -> Result<f64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::argument(format!(
            "trapezoid needs equal lengths, got {}, {} and grid {}",
            f.len(),
            g.len(),
            grid.len()
        )));
    }
    if grid.len() < 2 {
        return Err(Error::argument("trapezoid needs at least 2 points"));
    }
    Ok((0..grid.len() - 1)
        .map(|r| 0.5 * (grid[r + 1] - grid[r]) * (f[r] * g[r] + f[r + 1] * g[r + 1]))
        .sum())
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub selected: VariableSubset,
    pub true_set: VariableSubset,
    pub msep: f64,
    pub size: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ReplicationReport {
    pub fn new(selected: VariableSubset, true_set: VariableSubset, msep: f64) -> Self {
        Self {
            size: selected.len(),
            selected,
            true_set,
            msep,
            alpha: f64::NAN,
            beta: f64::NAN,
        }
    }

    /// Selected predictors outside the true set.
    pub fn false_discoveries(&self) -> usize {
        self.selected
            .indices()
            .iter()
            .filter(|i| !self.true_set.contains(**i))
            .count()
    }

    pub fn covers(&self) -> bool {
        self.selected.is_superset_of(&self.true_set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsepSummary {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl MsepSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Share of replications whose selection contains the true set.
    pub cvp: f64,
    /// Mean share of false discoveries among selected predictors.
    pub fdr: f64,
    /// Mean selected-set size.
    pub msize: f64,
    pub msep: MsepSummary,
}

pub fn metrics(reports: &[ReplicationReport]) -> Result<Metrics> {
    if reports.is_empty() {
        return Err(Error::argument("metrics need at least one replication"));
    }
    if let Some(k) = reports.iter().position(|r| r.selected.is_empty()) {
        return Err(Error::argument(format!(
            "replication {} selected nothing",
            k + 1
        )));
    }
    let r = reports.len() as f64;
    let cvp = reports.iter().filter(|x| x.covers()).count() as f64 / r;
    let fdr = reports
        .iter()
        .map(|x| x.false_discoveries() as f64 / x.selected.len() as f64)
        .sum::<f64>()
        / r;
    let msize = reports.iter().map(|x| x.selected.len() as f64).sum::<f64>() / r;
    let mseps: Vec<f64> = reports.iter().map(|x| x.msep).collect();
    Ok(Metrics {
        cvp,
        fdr,
        msize,
        msep: MsepSummary::from_values(&mseps).expect("non-empty"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub index: usize,
    pub report: Option<ReplicationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: ScenarioSpec,
    pub basis: FamilyKind,
    pub replications: Vec<ReplicationOutcome>,
    pub metrics: Option<Metrics>,
    pub failures: usize,
}

impl StudyReport {
    pub fn successful(&self) -> Vec<ReplicationReport> {
        self.replications
            .iter()
            .filter_map(|r| r.report.clone())
            .collect()
    }
}

/// Fold-shuffle seed of replication `r`.
fn replication_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64)
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One replication: generate training and test samples, tune on training,
/// select and score on test.
pub fn run_replication(
    scenario: &ScenarioSpec,
    r: usize,
    config: &PipelineConfig,
) -> Result<ReplicationReport> {
    let training = generate_sample(scenario, r as u64, SampleRole::Training)?;
    let test = generate_sample(scenario, r as u64, SampleRole::Test)?;
    let mut cfg = config.clone();
    cfg.seed = replication_seed(scenario.seed, r);
    let out = tune_and_select(&training.dataset, &test.dataset, &cfg)?;
    let mut rep = ReplicationReport::new(out.result.selected, test.true_set, out.msep);
    rep.alpha = out.alpha;
    rep.beta = out.beta;
    Ok(rep)
}

/// `replications` independent replications. Failures are recorded, not
/// fatal. Replications run concurrently under `config.exec`; each one runs
/// sequentially inside.
pub fn run_study(
    scenario: &ScenarioSpec,
    replications: usize,
    config: &PipelineConfig,
) -> Result<StudyReport> {
    scenario.validate()?;
    if replications == 0 {
        return Err(Error::argument("at least one replication is required"));
    }
    if config.templates.len() != scenario.example.p() {
        return Err(Error::argument(format!(
            "{} basis templates for {} predictors",
            config.templates.len(),
            scenario.example.p()
        )));
    }
    let mut inner = config.clone();
    if config.exec.is_concurrent() {
        inner.exec = Execution::Sequential;
    }
    let outcomes = config.exec.map_indices(replications, |r| {
        match run_replication(scenario, r, &inner) {
            Ok(rep) => ReplicationOutcome {
                index: r,
                report: Some(rep),
                error: None,
            },
            Err(e) => ReplicationOutcome {
                index: r,
                report: None,
                error: Some(e.to_string()),
            },
        }
    });
    let successes: Vec<ReplicationReport> =
        outcomes.iter().filter_map(|o| o.report.clone()).collect();
    let failures = outcomes.len() - successes.len();
    let metrics = if successes.is_empty() {
        None
    } else {
        Some(metrics(&successes)?)
    };
    Ok(StudyReport {
        scenario: *scenario,
        basis: config.templates[0].kind,
        replications: outcomes,
        metrics,
        failures,
    })
}
