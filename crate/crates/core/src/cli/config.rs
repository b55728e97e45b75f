//! TOML run configuration.
//!
//! Every key is optional; command-line flags override the file.
//!
//! ```toml
//! seed = 7
//! replications = 50
//! basis = "fourier"            # fourier | bspline | gaussian
//! # bases = ["fourier", "bspline", ...]   one entry per predictor
//! dmax = 15
//! folds = 5
//! out = "out"
//! bspline_order = 4
//! # interval = [0.0, 1.0]      default: each predictor's grid span
//! dimension_budget = 0.5       # total dimension <= budget * n; 0 disables
//! penalty_scale = 0.1
//! relative_penalty = true      # multiply penalties by the cross-covariance norm
//! f = "reciprocal"             # reciprocal | reciprocal_square
//! g = "linear"                 # linear | square
//! centered_msep = false
//! final_on_full_sample = false
//! execution = "parallel"       # parallel | sequential
//!
//! [grid]
//! alphas = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45]
//! betas = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45]
//!
//! [data]                       # select and tune; paths relative to this file
//! curves = ["x1.csv", "x2.csv"]
//! responses = "y.csv"
//! predictors = 2               # optional check against the files
//!
//! [simulate]
//! example = 2
//! n = 100
//! sigma = 0.1
//! grid_points = 51
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::Failure;
use crate::basis::{BasisTemplate, FamilyKind, Interval};
use crate::criterion::{DecreasingPenalty, IncreasingPenalty, PenaltyScale};
use crate::exec::Execution;
use crate::simulate::{Example, ScenarioSpec, DEFAULT_GRID_POINTS, DEFAULT_REPLICATIONS};
use crate::tuning::{PipelineConfig, TuningGrid};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub basis: Option<FamilyKind>,
    pub bases: Option<Vec<FamilyKind>>,
    pub dmax: Option<usize>,
    pub folds: Option<usize>,
    pub out: Option<PathBuf>,
    pub bspline_order: Option<usize>,
    pub interval: Option<[f64; 2]>,
    pub dimension_budget: Option<f64>,
    pub penalty_scale: Option<f64>,
    pub relative_penalty: Option<bool>,
    pub f: Option<DecreasingPenalty>,
    pub g: Option<IncreasingPenalty>,
    pub centered_msep: Option<bool>,
    pub final_on_full_sample: Option<bool>,
    pub execution: Option<Execution>,
    pub grid: Option<GridSection>,
    pub data: Option<DataSection>,
    pub simulate: Option<SimulateSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub curves: Vec<PathBuf>,
    pub responses: PathBuf,
    pub predictors: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub example: Option<u8>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub grid_points: Option<usize>,
}

impl FileConfig {
    /// Parse `path`; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        if let Some(data) = cfg.data.as_mut() {
            let base = path.parent().unwrap_or(Path::new(""));
            for c in data.curves.iter_mut() {
                *c = base.join(&*c);
            }
            data.responses = base.join(&data.responses);
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(DEFAULT_REPLICATIONS)
    }

    /// Basis families for `p` predictors.
    pub fn families(&self, p: usize) -> Result<Vec<FamilyKind>, Failure> {
        match &self.bases {
            Some(list) if list.len() != p => Err(Failure::usage(format!(
                "config lists {} bases but the data has {p} predictors",
                list.len()
            ))),
            Some(list) => Ok(list.clone()),
            None => Ok(vec![self.basis.unwrap_or(FamilyKind::Fourier); p]),
        }
    }

    /// Pipeline settings for predictors living on `intervals`.
    pub fn pipeline(&self, intervals: &[Interval]) -> Result<PipelineConfig, Failure> {
        let fixed = match self.interval {
            Some([lo, hi]) => Some(Interval::new(lo, hi)?),
            None => None,
        };
        let templates = self
            .families(intervals.len())?
            .into_iter()
            .zip(intervals)
            .map(|(kind, iv)| {
                let mut t = BasisTemplate::new(kind, fixed.unwrap_or(*iv));
                if let Some(order) = self.bspline_order {
                    t.bspline_order = order;
                }
                t
            })
            .collect();
        let mut cfg = PipelineConfig::new(templates);
        cfg.seed = self.seed();
        if let Some(d) = self.dmax {
            cfg.d_max = d;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        match self.dimension_budget {
            Some(0.0) => cfg.dimension_budget = None,
            Some(b) if !(b.is_finite() && b > 0.0) => {
                return Err(Failure::usage(format!(
                    "dimension_budget must be positive or 0, got {b}"
                )))
            }
            Some(b) => cfg.dimension_budget = Some(b),
            None => {}
        }
        let mut scale = PenaltyScale::default();
        if let Some(l) = self.penalty_scale {
            scale.lambda = l;
        }
        if let Some(r) = self.relative_penalty {
            scale.relative = r;
        }
        scale.validate()?;
        cfg.cv.scale = scale;
        if let Some(f) = self.f {
            cfg.cv.f = f;
        }
        if let Some(g) = self.g {
            cfg.cv.g = g;
        }
        if let Some(c) = self.centered_msep {
            cfg.cv.centered_msep = c;
        }
        if let Some(full) = self.final_on_full_sample {
            cfg.final_on_full_sample = full;
        }
        if let Some(exec) = self.execution {
            cfg.exec = exec;
        }
        if let Some(g) = &self.grid {
            cfg.grid = TuningGrid::new(g.alphas.clone(), g.betas.clone())?;
        }
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<ScenarioSpec, Failure> {
        let sim = self.simulate.clone().unwrap_or_default();
        let example = Example::from_number(sim.example.unwrap_or(2))?;
        let mut s = ScenarioSpec::new(
            example,
            sim.n.unwrap_or(100),
            sim.sigma.unwrap_or(0.1),
            self.seed(),
        )?;
        s.grid_points = sim.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
        s.validate()?;
        Ok(s)
    }
}
