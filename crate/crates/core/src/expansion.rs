//! Least-squares basis coordinates of observed curves and BIC-driven
//! choice of the per-predictor basis dimension.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_basis, BasisSpec, BasisTemplate};
use crate::data::FunctionalDataset;
use crate::error::{Error, Result, ResultExt};
use crate::exec::Execution;

/// Default largest dimension scanned by the BIC search.
pub const DEFAULT_D_MAX: usize = 15;

/// Relative residual below which a fit counts as exact (`RSS ≤ tol² · ‖y‖²`).
const EXACT_FIT_RTOL: f64 = 1e-12;

/// One observed curve on its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveObservation {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl CurveObservation {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::argument(format!(
                "curve has {} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::argument("curve needs at least 2 observations"));
        }
        if grid
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::argument("curve grid must be strictly increasing"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Basis coordinates of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateVector(pub Vec<f64>);

impl CoordinateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A basis evaluated on a grid, factored once for repeated least-squares fits.
#[derive(Debug, Clone)]
pub struct LeastSquaresBasis {
    design: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquaresBasis {
    pub fn new(spec: &BasisSpec, grid: &[f64]) -> Result<Self> {
        let d = spec.dimension();
        if grid.len() < d {
            return Err(Error::argument(format!(
                "{} grid points cannot determine {} coordinates",
                grid.len(),
                d
            )));
        }
        let design = eval_basis(spec, grid)?;
        let qr = design.clone().qr();
        let r = qr.r();
        let scale = (0..d).fold(0.0_f64, |m, k| m.max(r[(k, k)].abs()));
        if let Some(k) = (0..d).find(|&k| r[(k, k)].abs() <= 1e-10 * scale) {
            return Err(Error::numerical(format!(
                "basis design is rank deficient at dimension {} of {}",
                k + 1,
                d
            )));
        }
        Ok(Self {
            q: qr.q(),
            r,
            design,
        })
    }

    pub fn dimension(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Least-squares coordinates and the residual sum of squares.
    pub fn fit(&self, values: &[f64]) -> Result<(CoordinateVector, f64)> {
        if values.len() != self.design.nrows() {
            return Err(Error::argument(format!(
                "expected {} values, got {}",
                self.design.nrows(),
                values.len()
            )));
        }
        let y = DVector::from_column_slice(values);
        let qty = self.q.tr_mul(&y);
        let coords = self
            .r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::numerical("triangular solve failed"))?;
        let resid = &y - &self.design * &coords;
        let rss = resid.norm_squared();
        Ok((CoordinateVector(coords.iter().copied().collect()), rss))
    }

    pub fn bic(&self, values: &[f64]) -> Result<BicScore> {
        let (_, rss) = self.fit(values)?;
        let energy: f64 = values.iter().map(|v| v * v).sum();
        Ok(BicScore::from_rss(
            rss,
            energy,
            self.dimension(),
            values.len(),
        ))
    }
}

/// Least-squares coordinates of `curve` in `spec`.
pub fn fit_coordinates(curve: &CurveObservation, spec: &BasisSpec) -> Result<CoordinateVector> {
    let basis = LeastSquaresBasis::new(spec, &curve.grid)?;
    basis.fit(&curve.values).map(|(c, _)| c)
}

/// BIC value of a fit; an exact fit is the `-∞` sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicScore {
    pub value: f64,
    pub exact_fit: bool,
}

impl BicScore {
    /// `ln(RSS) + (m + 1) ln(N) / N`.
    pub fn from_rss(rss: f64, energy: f64, m: usize, n: usize) -> Self {
        if rss <= EXACT_FIT_RTOL * EXACT_FIT_RTOL * energy || rss == 0.0 {
            return Self {
                value: f64::NEG_INFINITY,
                exact_fit: true,
            };
        }
        Self {
            value: rss.ln() + bic_penalty(m, n),
            exact_fit: false,
        }
    }
}

/// The BIC complexity term `(m + 1) ln(N) / N`.
pub fn bic_penalty(m: usize, n: usize) -> f64 {
    (m + 1) as f64 * (n as f64).ln() / n as f64
}

pub fn bic_score(curve: &CurveObservation, spec: &BasisSpec) -> Result<BicScore> {
    LeastSquaresBasis::new(spec, &curve.grid)?.bic(&curve.values)
}

/// Index of the smallest score; ties (including several exact fits) go to
/// the earliest entry.
fn argmin_first(scores: &[BicScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.value < scores[best].value {
            best = i;
        }
    }
    best
}

/// Per-curve BIC-optimal dimensions, indexed `[predictor][sample]`.
pub fn curve_dimensions(
    sample: &FunctionalDataset,
    templates: &[BasisTemplate],
    d_max: usize,
    exec: Execution,
) -> Result<Vec<Vec<usize>>> {
    if templates.len() != sample.p() {
        return Err(Error::argument(format!(
            "{} basis templates for {} predictors",
            templates.len(),
            sample.p()
        )));
    }
    if d_max == 0 {
        return Err(Error::argument("d_max must be at least 1"));
    }
    let n = sample.n();
    let mut out = Vec::with_capacity(sample.p());
    for (l, template) in templates.iter().enumerate() {
        let predictor = sample.predictor(l);
        let first = template.min_dimension();
        if first > d_max {
            return Err(Error::argument(format!(
                "d_max {d_max} is below the minimum dimension {first} of predictor {}",
                l + 1
            )));
        }
        let bases = (first..=d_max)
            .map(|m| {
                template
                    .with_dimension(m)
                    .and_then(|spec| LeastSquaresBasis::new(&spec, predictor.grid()))
            })
            .collect::<Result<Vec<_>>>()
            .stage(|| format!("predictor {}", l + 1))?;
        let per_curve = exec.map_indices(n, |i| {
            let values = &predictor.curves()[i];
            let scores = bases
                .iter()
                .map(|b| b.bic(values))
                .collect::<Result<Vec<_>>>()
                .stage(|| format!("sample {}, predictor {}", i + 1, l + 1))?;
            Ok(first + argmin_first(&scores))
        });
        out.push(per_curve.into_iter().collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

/// Per-predictor dimensions: the maximum over samples of each curve's
/// BIC-optimal dimension in `1..=d_max` (or from the family's minimum).
pub fn select_dimensions(
    sample: &FunctionalDataset,
    templates: &[BasisTemplate],
    d_max: usize,
    exec: Execution,
) -> Result<Vec<usize>> {
    let per_curve = curve_dimensions(sample, templates, d_max, exec)?;
    Ok(per_curve
        .iter()
        .zip(templates)
        .map(|(dims, t)| dims.iter().copied().max().unwrap_or(t.min_dimension()))
        .collect())
}

/// Shrink `dims` until their total is at most `budget`. Each step removes
/// one basis function from the predictor that loses the least pooled
/// explained variance `ΣRSS/ΣTSS` by it. Dimensions never go below the
/// family minimum, so the result can exceed a budget smaller than the sum
/// of those minimums.
pub fn fit_to_budget(
    sample: &FunctionalDataset,
    templates: &[BasisTemplate],
    dims: &[usize],
    budget: usize,
    exec: Execution,
) -> Result<Vec<usize>> {
    if templates.len() != sample.p() || dims.len() != sample.p() {
        return Err(Error::argument(format!(
            "expected {} basis templates and dimensions",
            sample.p()
        )));
    }
    let mut dims = dims.to_vec();
    if dims.iter().sum::<usize>() <= budget {
        return Ok(dims);
    }
    // unexplained[l][k] is the unexplained fraction at dimension min + k.
    let unexplained = exec
        .map_indices(sample.p(), |l| {
            let predictor = sample.predictor(l);
            let tss: f64 = predictor
                .curves()
                .iter()
                .map(|c| {
                    let mean = c.iter().sum::<f64>() / c.len() as f64;
                    c.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                })
                .sum();
            let denom = if tss > 0.0 { tss } else { 1.0 };
            (templates[l].min_dimension()..=dims[l])
                .map(|m| {
                    let basis =
                        LeastSquaresBasis::new(&templates[l].with_dimension(m)?, predictor.grid())?;
                    let mut rss = 0.0;
                    for c in predictor.curves() {
                        rss += basis.fit(c)?.1;
                    }
                    Ok(rss / denom)
                })
                .collect::<Result<Vec<f64>>>()
                .stage(|| format!("predictor {}", l + 1))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    while dims.iter().sum::<usize>() > budget {
        let mut best: Option<(f64, usize)> = None;
        for (l, t) in templates.iter().enumerate() {
            let k = dims[l] - t.min_dimension();
            if k == 0 {
                continue;
            }
            let loss = unexplained[l][k - 1] - unexplained[l][k];
            if best.is_none_or(|(b, _)| loss < b) {
                best = Some((loss, l));
            }
        }
        match best {
            Some((_, l)) => dims[l] -= 1,
            None => break,
        }
    }
    Ok(dims)
}

/// Coordinates of every curve, indexed `[sample][predictor]`.
pub fn dataset_coordinates(
    sample: &FunctionalDataset,
    specs: &[BasisSpec],
) -> Result<Vec<Vec<CoordinateVector>>> {
    if specs.len() != sample.p() {
        return Err(Error::argument(format!(
            "{} basis specs for {} predictors",
            specs.len(),
            sample.p()
        )));
    }
    let bases = specs
        .iter()
        .enumerate()
        .map(|(l, s)| {
            LeastSquaresBasis::new(s, sample.predictor(l).grid())
                .stage(|| format!("predictor {}", l + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    (0..sample.n())
        .map(|i| {
            bases
                .iter()
                .enumerate()
                .map(|(l, b)| {
                    b.fit(&sample.predictor(l).curves()[i])
                        .map(|(c, _)| c)
                        .stage(|| format!("sample {}, predictor {}", i + 1, l + 1))
                })
                .collect()
        })
        .collect()
}
