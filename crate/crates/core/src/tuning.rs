//! Prediction error, V-fold cross-validation of the penalty exponents
//! `(α, β)`, and the end-to-end selection pipeline.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{gram, BasisSpec, BasisTemplate, GramMatrix};
use crate::criterion::{
    cardinality_from_xi, ranking_from_xi, select_variables, xi_blocks, DecreasingPenalty,
    IncreasingPenalty, PenaltyScale, SelectionConfig, SelectionResult, VariableSubset,
};
use crate::data::FunctionalDataset;
use crate::design::{assemble_design, covariances, StackedDesign};
use crate::error::{Error, Result, ResultExt};
use crate::exec::Execution;
use crate::expansion::{dataset_coordinates, fit_to_budget, select_dimensions, DEFAULT_D_MAX};
use crate::linalg::solve_spd;

/// Default total-dimension budget, as a fraction of the sample size.
pub const DEFAULT_DIMENSION_BUDGET: f64 = 0.5;

/// Default number of folds.
pub const DEFAULT_FOLDS: usize = 5;

/// `V` disjoint folds of equal size `m` over the rows of a training design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn new(folds: Vec<Vec<usize>>) -> Result<Self> {
        if folds.len() < 2 {
            return Err(Error::argument(format!(
                "cross-validation needs at least 2 folds, got {}",
                folds.len()
            )));
        }
        let m = folds[0].len();
        if m == 0 || folds.iter().any(|f| f.len() != m) {
            return Err(Error::argument("folds must be non-empty and of equal size"));
        }
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::argument("folds must be disjoint"));
        }
        Ok(Self { folds })
    }

    /// Seeded shuffle of `0..n` cut into `v` folds of size `n / v`; the
    /// `n mod v` leftover rows are left out of the plan.
    pub fn shuffled(n: usize, v: usize, seed: u64) -> Result<Self> {
        if v < 2 {
            return Err(Error::argument(format!(
                "cross-validation needs at least 2 folds, got {v}"
            )));
        }
        if n < 2 * v {
            return Err(Error::argument(format!(
                "{n} training rows cannot be split into {v} folds of at least 2"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(FOLD_STREAM);
        idx.shuffle(&mut rng);
        let m = n / v;
        Self::new(idx.chunks_exact(m).take(v).map(|c| c.to_vec()).collect())
    }

    pub fn v(&self) -> usize {
        self.folds.len()
    }

    pub fn fold(&self, j: usize) -> &[usize] {
        &self.folds[j]
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    /// Rows of every fold except `j`, sorted.
    pub fn training_rows(&self, j: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

const FOLD_STREAM: u64 = 0xF01D;
const SPLIT_STREAM: u64 = 0x5B17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for TuningGrid {
    /// `{0.05, 0.10, …, 0.45}²`.
    fn default() -> Self {
        let axis: Vec<f64> = (1..=9).map(|k| k as f64 / 20.0).collect();
        Self {
            alphas: axis.clone(),
            betas: axis,
        }
    }
}

impl TuningGrid {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let grid = Self { alphas, betas };
        grid.validate()?;
        Ok(grid)
    }

    pub fn single(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha], vec![beta])
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::argument("tuning grid is empty"));
        }
        if let Some(v) = self
            .alphas
            .iter()
            .chain(&self.betas)
            .find(|v| !(**v > 0.0 && **v < 0.5))
        {
            return Err(Error::argument(format!(
                "tuning grid value {v} lies outside (0, 0.5)"
            )));
        }
        Ok(())
    }

    /// Grid points in α-major order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.alphas
            .iter()
            .flat_map(|&a| self.betas.iter().map(move |&b| (a, b)))
            .collect()
    }
}

/// `MSEP_K^S = ‖𝕐_S − 𝕏_S A_Kᵀ (A_K 𝕏_Sᵀ 𝕏_S A_Kᵀ)⁻¹ A_K 𝕏_Sᵀ 𝕐_S‖² / |S|`,
/// the in-sample least-squares residual on rows `S` using the `K` blocks.
/// The design is used uncentered unless `centered` is set.
pub fn msep(
    k: &VariableSubset,
    rows: &[usize],
    design: &StackedDesign,
    centered: bool,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::argument("MSEP needs at least one row"));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= design.n()) {
        return Err(Error::argument(format!("row {bad} out of range")));
    }
    if k.indices().iter().any(|&i| i >= design.p()) {
        return Err(Error::argument("variable subset out of range"));
    }
    let cols = design.layout().columns(k.indices());
    let mut x = design.vectors().select_rows(rows).select_columns(&cols);
    let mut y = design.responses().select_rows(rows);
    if centered {
        center_columns(&mut x);
        center_columns(&mut y);
    }
    let normal = x.tr_mul(&x);
    let rhs = x.tr_mul(&y);
    let b = solve_spd(&normal, &rhs)
        .map_err(|_| {
            Error::numerical(format!(
                "normal matrix for K = {:?} on {} rows is singular even with jitter",
                k.one_based(),
                rows.len()
            ))
        })?
        .x;
    let resid = y - x * b;
    Ok(resid.norm_squared() / rows.len() as f64)
}

fn center_columns(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Options shared by every selection run inside cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CvOptions {
    pub f: DecreasingPenalty,
    pub g: IncreasingPenalty,
    pub scale: PenaltyScale,
    pub centered_msep: bool,
}

impl CvOptions {
    pub fn selection(&self, alpha: f64, beta: f64) -> Result<SelectionConfig> {
        SelectionConfig::with_penalties(alpha, beta, self.f, self.g)?.scaled(self.scale)
    }
}

/// Cross-validation index at one `(α, β)`, with its per-fold parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEvaluation {
    pub alpha: f64,
    pub beta: f64,
    pub cv: f64,
    pub fold_terms: Vec<f64>,
    pub fold_sets: Vec<VariableSubset>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `CV(α, β) = V⁻¹ Σ_j MSEP_{Î₁^(−j)}^{𝒮_j}` where `Î₁^(−j)` is selected on
/// every fold except `j`.
pub fn cv_index(
    alpha: f64,
    beta: f64,
    design: &StackedDesign,
    folds: &FoldPlan,
    options: &CvOptions,
) -> Result<CvEvaluation> {
    let config = options.selection(alpha, beta)?;
    let mut fold_terms = Vec::with_capacity(folds.v());
    let mut fold_sets = Vec::with_capacity(folds.v());
    for j in 0..folds.v() {
        let run = || -> Result<(f64, VariableSubset)> {
            let train = design.rows(&folds.training_rows(j));
            let sel = select_variables(&train, &config)?;
            let term = msep(&sel.selected, folds.fold(j), design, options.centered_msep)?;
            Ok((term, sel.selected))
        };
        let (term, set) = run().stage(|| format!("fold {}", j + 1))?;
        fold_terms.push(term);
        fold_sets.push(set);
    }
    Ok(CvEvaluation {
        alpha,
        beta,
        cv: mean(&fold_terms),
        fold_terms,
        fold_sets,
    })
}

/// Per-fold quantities that do not depend on `(α, β)`.
struct FoldWork<'a> {
    design: &'a StackedDesign,
    held_out: &'a [usize],
    cov: crate::design::CovariancePair,
    leave_one_out: Vec<f64>,
    prefix_xi: HashMap<Vec<usize>, f64>,
    msep: HashMap<VariableSubset, f64>,
    centered: bool,
}

impl<'a> FoldWork<'a> {
    fn new(
        design: &'a StackedDesign,
        folds: &'a FoldPlan,
        j: usize,
        centered: bool,
    ) -> Result<Self> {
        let train = design.rows(&folds.training_rows(j));
        let cov = covariances(&train)?;
        let p = cov.layout.p();
        let leave_one_out = if p == 1 {
            vec![cov.c12.norm()]
        } else {
            (0..p)
                .map(|l| {
                    let k: Vec<usize> = (0..p).filter(|&i| i != l).collect();
                    xi_blocks(&k, &cov)
                })
                .collect::<Result<Vec<_>>>()
                .stage(|| "ranking".into())?
        };
        Ok(Self {
            design,
            held_out: folds.fold(j),
            cov,
            leave_one_out,
            prefix_xi: HashMap::new(),
            msep: HashMap::new(),
            centered,
        })
    }

    fn evaluate(&mut self, config: &SelectionConfig) -> Result<(f64, VariableSubset)> {
        let n = self.cov.n;
        let weight = config.scale.weight(self.cov.c12.norm());
        let ranking = ranking_from_xi(self.leave_one_out.clone(), config, n, weight);
        let mut xi = Vec::with_capacity(ranking.ordered.len());
        for len in 1..=ranking.ordered.len() {
            let mut prefix = ranking.ordered[..len].to_vec();
            prefix.sort_unstable();
            let v = match self.prefix_xi.get(&prefix) {
                Some(v) => *v,
                None => {
                    let v = xi_blocks(&prefix, &self.cov).stage(|| "cardinality".into())?;
                    self.prefix_xi.insert(prefix, v);
                    v
                }
            };
            xi.push(v);
        }
        let card = cardinality_from_xi(xi, &ranking.ordered, config, n, weight);
        let selected =
            VariableSubset::new(ranking.ordered[..card.d_hat].to_vec(), self.cov.layout.p())?;
        let term = match self.msep.get(&selected) {
            Some(v) => *v,
            None => {
                let v = msep(&selected, self.held_out, self.design, self.centered)?;
                self.msep.insert(selected.clone(), v);
                v
            }
        };
        Ok((term, selected))
    }
}

/// One grid point of the CV surface; `cv` is `None` when some fold failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub alpha: f64,
    pub beta: f64,
    pub cv: Option<f64>,
    pub fold_terms: Vec<f64>,
    pub fold_sets: Vec<VariableSubset>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub alpha: f64,
    pub beta: f64,
    pub cv: f64,
    pub surface: Vec<CvPoint>,
}

/// The full CV surface over `grid` (α-major order). Folds are processed
/// independently and reassembled by grid index.
pub fn cv_surface(
    design: &StackedDesign,
    folds: &FoldPlan,
    grid: &TuningGrid,
    options: &CvOptions,
    exec: Execution,
) -> Result<Vec<CvPoint>> {
    grid.validate()?;
    let configs = grid
        .points()
        .into_iter()
        .map(|(a, b)| options.selection(a, b))
        .collect::<Result<Vec<_>>>()?;
    let per_fold: Vec<Vec<Result<(f64, VariableSubset)>>> = exec.map_indices(folds.v(), |j| {
        match FoldWork::new(design, folds, j, options.centered_msep) {
            Ok(mut work) => configs
                .iter()
                .map(|c| work.evaluate(c).stage(|| format!("fold {}", j + 1)))
                .collect(),
            Err(e) => {
                let e = e.at(format!("fold {}", j + 1));
                configs.iter().map(|_| Err(e.clone())).collect()
            }
        }
    });
    Ok(configs
        .iter()
        .enumerate()
        .map(|(g, c)| {
            let mut terms = Vec::with_capacity(folds.v());
            let mut sets = Vec::with_capacity(folds.v());
            let mut error = None;
            for fold in &per_fold {
                match &fold[g] {
                    Ok((t, s)) => {
                        terms.push(*t);
                        sets.push(s.clone());
                    }
                    Err(e) => {
                        error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            CvPoint {
                alpha: c.alpha,
                beta: c.beta,
                cv: error.is_none().then(|| mean(&terms)),
                fold_terms: terms,
                fold_sets: sets,
                error,
            }
        })
        .collect())
}

/// CV values within `CV_TIE_RTOL · ‖𝕐‖²/n` of the minimum count as ties.
/// Folds whose selected design interpolates the held-out rows give MSEP at
/// roundoff level, and those values carry no ordering information.
pub const CV_TIE_RTOL: f64 = 1e-10;

/// Index of the smallest CV value. Values within `tol` of the minimum are
/// tied; ties go to smaller α, then smaller β.
pub fn argmin_surface(surface: &[CvPoint], tol: f64) -> Option<usize> {
    let min = surface.iter().filter_map(|p| p.cv).min_by(f64::total_cmp)?;
    surface
        .iter()
        .enumerate()
        .filter(|(_, p)| p.cv.is_some_and(|cv| cv <= min + tol))
        .min_by(|(_, a), (_, b)| a.alpha.total_cmp(&b.alpha).then(a.beta.total_cmp(&b.beta)))
        .map(|(i, _)| i)
}

/// Tie tolerance for CV values on `design`.
pub fn cv_tolerance(design: &StackedDesign) -> f64 {
    CV_TIE_RTOL * design.responses().norm_squared() / design.n() as f64
}

/// `(α̂, β̂) = argmin CV(α, β)` over the grid, by exhaustive evaluation.
pub fn optimize_tuning(
    design: &StackedDesign,
    folds: &FoldPlan,
    grid: &TuningGrid,
    options: &CvOptions,
    exec: Execution,
) -> Result<TuningOutcome> {
    let surface = cv_surface(design, folds, grid, options, exec)?;
    match argmin_surface(&surface, cv_tolerance(design)) {
        Some(i) => Ok(TuningOutcome {
            alpha: surface[i].alpha,
            beta: surface[i].beta,
            cv: surface[i].cv.unwrap(),
            surface,
        }),
        None => {
            let mut msgs: Vec<String> = surface.iter().filter_map(|p| p.error.clone()).collect();
            msgs.dedup();
            Err(Error::numerical(format!(
                "cross-validation failed at all {} grid points: {}",
                surface.len(),
                msgs.join("; ")
            )))
        }
    }
}

/// A functional sample reduced to a stacked design.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub dims: Vec<usize>,
    pub specs: Vec<BasisSpec>,
    pub grams: Vec<GramMatrix>,
    pub design: StackedDesign,
}

/// BIC dimensions, coordinates, Gram matrices and the stacked design.
pub fn prepare_sample(
    sample: &FunctionalDataset,
    templates: &[BasisTemplate],
    d_max: usize,
    budget: Option<f64>,
    exec: Execution,
) -> Result<PreparedSample> {
    let mut dims =
        select_dimensions(sample, templates, d_max, exec).stage(|| "dimensions".into())?;
    if let Some(ratio) = budget {
        let total = dimension_budget(ratio, sample.n())?;
        dims = fit_to_budget(sample, templates, &dims, total, exec)
            .stage(|| "dimension budget".into())?;
    }
    prepare_with_dimensions(sample, templates, &dims)
}

/// `⌊ratio · n⌋`, the largest total dimension allowed on `n` samples.
pub fn dimension_budget(ratio: f64, n: usize) -> Result<usize> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::argument(format!(
            "dimension budget must be a positive fraction of n, got {ratio}"
        )));
    }
    Ok(((ratio * n as f64).floor() as usize).max(1))
}

/// As [`prepare_sample`] with fixed dimensions.
pub fn prepare_with_dimensions(
    sample: &FunctionalDataset,
    templates: &[BasisTemplate],
    dims: &[usize],
) -> Result<PreparedSample> {
    if templates.len() != sample.p() || dims.len() != sample.p() {
        return Err(Error::argument(format!(
            "expected {} basis templates and dimensions",
            sample.p()
        )));
    }
    let specs = templates
        .iter()
        .zip(dims)
        .map(|(t, &d)| t.with_dimension(d))
        .collect::<Result<Vec<_>>>()?;
    let grams = specs
        .iter()
        .enumerate()
        .map(|(l, s)| {
            gram(s, sample.predictor(l).grid()).stage(|| format!("Gram matrix {}", l + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let coords = dataset_coordinates(sample, &specs).stage(|| "coordinates".into())?;
    let design = assemble_design(&coords, &grams, sample.responses()).stage(|| "design".into())?;
    Ok(PreparedSample {
        dims: dims.to_vec(),
        specs,
        grams,
        design,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub templates: Vec<BasisTemplate>,
    pub d_max: usize,
    /// Cap on the total dimension `Σd_ℓ` as a fraction of the sample size;
    /// `None` keeps the BIC dimensions as they are.
    pub dimension_budget: Option<f64>,
    pub grid: TuningGrid,
    pub folds: usize,
    pub cv: CvOptions,
    pub seed: u64,
    /// Run the final selection on training ∪ test instead of the test half.
    pub final_on_full_sample: bool,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(templates: Vec<BasisTemplate>) -> Self {
        Self {
            templates,
            d_max: DEFAULT_D_MAX,
            dimension_budget: Some(DEFAULT_DIMENSION_BUDGET),
            grid: TuningGrid::default(),
            folds: DEFAULT_FOLDS,
            cv: CvOptions::default(),
            seed: 0,
            final_on_full_sample: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub result: SelectionResult,
    pub alpha: f64,
    pub beta: f64,
    pub cv: f64,
    pub training_dims: Vec<usize>,
    pub final_dims: Vec<usize>,
    pub surface: Vec<CvPoint>,
    pub folds: FoldPlan,
    /// MSEP of the selected set on the final sample.
    pub msep: f64,
}

/// Tune `(α, β)` by V-fold CV on `training`, then select on `test` with the
/// tuned pair.
pub fn tune_and_select(
    training: &FunctionalDataset,
    test: &FunctionalDataset,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let train = prepare_sample(
        training,
        &config.templates,
        config.d_max,
        config.dimension_budget,
        config.exec,
    )
    .stage(|| "training sample".into())?;
    let folds = FoldPlan::shuffled(train.design.n(), config.folds, config.seed)
        .stage(|| "fold plan".into())?;
    let tuned = optimize_tuning(&train.design, &folds, &config.grid, &config.cv, config.exec)
        .stage(|| "tuning".into())?;
    let final_sample = prepare_sample(
        test,
        &config.templates,
        config.d_max,
        config.dimension_budget,
        config.exec,
    )
    .stage(|| "test sample".into())?;
    let sel_config = config.cv.selection(tuned.alpha, tuned.beta)?;
    let result =
        select_variables(&final_sample.design, &sel_config).stage(|| "final selection".into())?;
    let all_rows: Vec<usize> = (0..final_sample.design.n()).collect();
    let final_msep = msep(
        &result.selected,
        &all_rows,
        &final_sample.design,
        config.cv.centered_msep,
    )
    .stage(|| "test MSEP".into())?;
    Ok(PipelineOutcome {
        result,
        alpha: tuned.alpha,
        beta: tuned.beta,
        cv: tuned.cv,
        training_dims: train.dims,
        final_dims: final_sample.dims,
        surface: tuned.surface,
        folds,
        msep: final_msep,
    })
}

/// Seeded split of `0..n` into a training half and a test half.
pub fn split_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    idx.shuffle(&mut rng);
    let test = idx.split_off(n / 2);
    idx.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    (idx, test)
}

/// Split one sample into halves, tune on the first and select on the second
/// (or on the whole sample when `final_on_full_sample` is set).
pub fn run_pipeline(
    sample: &FunctionalDataset,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let (train_rows, test_rows) = split_halves(sample.n(), config.seed);
    let training = sample.subset(&train_rows);
    if config.final_on_full_sample {
        tune_and_select(&training, sample, config)
    } else {
        tune_and_select(&training, &sample.subset(&test_rows), config)
    }
}
