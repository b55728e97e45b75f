//! The covariance-projection relevance criterion and the penalized
//! ranking / cardinality estimates built on it.
//!
//! For a subset `K` of predictors, `ξ̂_K = ‖Ĉ₁₂ − Ĉ₁ Π̂_K Ĉ₁₂‖_F` with
//! `Π̂_K = A_Kᵀ (A_K Ĉ₁ A_Kᵀ)⁻¹ A_K`. It vanishes (in population) exactly
//! when `K` contains every relevant predictor. Predictors are ranked by
//! `φ̂_ℓ = ξ̂_{K_ℓ} + f(ℓ)/n^α` where `K_ℓ` drops `ℓ`, and the number of
//! relevant predictors is the first minimizer of
//! `ψ̂_ℓ = ξ̂_{Ĵ_ℓ} + g(ν̂_ℓ)/n^β` over the nested prefixes `Ĵ_ℓ`.
//!
//! Indices are 0-based in the API; reports convert to 1-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{covariances, BlockLayout, CovariancePair, StackedDesign};
use crate::error::{Error, Result, ResultExt};
use crate::linalg::solve_spd;

/// A non-empty, strictly increasing set of predictor indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableSubset(Vec<usize>);

impl VariableSubset {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::argument("variable subset must be non-empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= p) {
            return Err(Error::argument(format!(
                "variable index {} out of range 1..={p}",
                bad + 1
            )));
        }
        Ok(Self(indices))
    }

    pub fn from_one_based(indices: &[usize], p: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::argument("1-based variable index 0 is invalid"));
        }
        Self::new(indices.iter().map(|i| i - 1).collect(), p)
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    /// `{0..p} ∖ {l}`; `None` when that is empty.
    pub fn without(p: usize, l: usize) -> Option<Self> {
        let v: Vec<usize> = (0..p).filter(|&i| i != l).collect();
        (!v.is_empty()).then_some(Self(v))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_superset_of(&self, other: &VariableSubset) -> bool {
        other.0.iter().all(|i| self.contains(*i))
    }
}

/// Strictly decreasing penalty `f` on `1..=p` used in the ranking step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecreasingPenalty {
    /// `1/ℓ`
    #[default]
    Reciprocal,
    /// `1/ℓ²`
    ReciprocalSquare,
}

impl DecreasingPenalty {
    pub fn value(self, l: usize) -> f64 {
        let l = l as f64;
        match self {
            DecreasingPenalty::Reciprocal => 1.0 / l,
            DecreasingPenalty::ReciprocalSquare => 1.0 / (l * l),
        }
    }
}

/// Strictly increasing penalty `g` on `1..=p` used in the cardinality step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncreasingPenalty {
    /// `m`
    #[default]
    Linear,
    /// `m²`
    Square,
}

impl IncreasingPenalty {
    pub fn value(self, m: usize) -> f64 {
        let m = m as f64;
        match self {
            IncreasingPenalty::Linear => m,
            IncreasingPenalty::Square => m * m,
        }
    }
}

/// Common multiplier `λ` on both penalty terms. With `relative` set the
/// penalties are also multiplied by `‖Ĉ₁₂‖_F`, which makes the selection
/// invariant to the units of the predictors and responses.
/// `PenaltyScale::literal()` gives the bare `f(ℓ)/n^α` and `g(m)/n^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyScale {
    pub lambda: f64,
    pub relative: bool,
}

pub const DEFAULT_PENALTY_LAMBDA: f64 = 0.1;

impl Default for PenaltyScale {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_PENALTY_LAMBDA,
            relative: true,
        }
    }
}

impl PenaltyScale {
    pub fn literal() -> Self {
        Self {
            lambda: 1.0,
            relative: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::argument(format!(
                "penalty scale must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Multiplier for a sample whose cross-covariance has norm `c12_norm`.
    pub fn weight(&self, c12_norm: f64) -> f64 {
        if self.relative {
            self.lambda * c12_norm
        } else {
            self.lambda
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub beta: f64,
    pub f: DecreasingPenalty,
    pub g: IncreasingPenalty,
    pub scale: PenaltyScale,
}

impl SelectionConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_penalties(
            alpha,
            beta,
            DecreasingPenalty::default(),
            IncreasingPenalty::default(),
        )
    }

    pub fn with_penalties(
        alpha: f64,
        beta: f64,
        f: DecreasingPenalty,
        g: IncreasingPenalty,
    ) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::argument(format!(
                    "{name} must lie in (0, 0.5), got {v}"
                )));
            }
        }
        Ok(Self {
            alpha,
            beta,
            f,
            g,
            scale: PenaltyScale::default(),
        })
    }

    pub fn scaled(mut self, scale: PenaltyScale) -> Result<Self> {
        scale.validate()?;
        self.scale = scale;
        Ok(self)
    }
}

/// Output of the ranking step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// `ν̂₁ … ν̂_p`.
    pub ordered: Vec<usize>,
    /// `φ̂_ℓ`, indexed by predictor.
    pub phi: Vec<f64>,
    /// `ξ̂_{K_ℓ}`, indexed by predictor.
    pub xi: Vec<f64>,
}

/// Output of the cardinality step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cardinality {
    /// `D̂ ∈ 1..=p`.
    pub d_hat: usize,
    /// `ψ̂_ℓ`, indexed by prefix length `ℓ - 1`.
    pub psi: Vec<f64>,
    /// `ξ̂_{Ĵ_ℓ}`, indexed by prefix length `ℓ - 1`.
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ordered: Vec<usize>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub d_hat: usize,
    pub selected: VariableSubset,
}

/// The 0/1 matrix `A_K` that extracts the `K` blocks of a stacked vector.
pub fn selection_matrix(k: &VariableSubset, layout: &BlockLayout) -> Result<DMatrix<f64>> {
    check_subset(k, layout)?;
    let cols = layout.columns(k.indices());
    let mut a = DMatrix::zeros(cols.len(), layout.total());
    for (r, c) in cols.into_iter().enumerate() {
        a[(r, c)] = 1.0;
    }
    Ok(a)
}

fn check_subset(k: &VariableSubset, layout: &BlockLayout) -> Result<()> {
    match k.indices().last() {
        Some(&last) if last >= layout.p() => Err(Error::argument(format!(
            "variable index {} out of range 1..={}",
            last + 1,
            layout.p()
        ))),
        _ => Ok(()),
    }
}

fn subset_label(blocks: &[usize]) -> String {
    let one: Vec<String> = blocks.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", one.join(","))
}

/// `ξ̂` for a list of block indices; the empty list gives `‖Ĉ₁₂‖`.
pub(crate) fn xi_blocks(blocks: &[usize], cov: &CovariancePair) -> Result<f64> {
    if blocks.is_empty() {
        return Ok(cov.c12.norm());
    }
    let cols = cov.layout.columns(blocks);
    let sub = cov.c1.select_rows(&cols).select_columns(&cols);
    let rhs = cov.c12.select_rows(&cols);
    let z = solve_spd(&sub, &rhs)
        .map_err(|f| {
            Error::numerical(format!(
                "covariance block of K = {} ({}×{}) is singular even with jitter {:e}",
                subset_label(blocks),
                f.dim,
                f.dim,
                f.jitter
            ))
        })?
        .x;
    let resid = &cov.c12 - cov.c1.select_columns(&cols) * z;
    Ok(resid.norm())
}

/// `ξ̂_K = ‖Ĉ₁₂ − Ĉ₁ Π̂_K Ĉ₁₂‖_F`.
pub fn xi_hat(k: &VariableSubset, cov: &CovariancePair) -> Result<f64> {
    check_subset(k, &cov.layout)?;
    xi_blocks(k.indices(), cov)
}

/// `Π̂_K = A_Kᵀ (A_K Ĉ₁ A_Kᵀ)⁻¹ A_K` as a dense `d × d` matrix.
pub fn projection_matrix(
    k: &VariableSubset,
    c1: &DMatrix<f64>,
    layout: &BlockLayout,
) -> Result<DMatrix<f64>> {
    let a = selection_matrix(k, layout)?;
    let inner = &a * c1 * a.transpose();
    let inv = crate::linalg::inverse_spd(&inner)
        .map_err(|_| {
            Error::numerical(format!(
                "covariance block of K = {} is singular",
                subset_label(k.indices())
            ))
        })?
        .x;
    Ok(a.transpose() * inv * a)
}

/// Rank predictors by decreasing `φ̂_ℓ = ξ̂_{K_ℓ} + w·f(ℓ)/n^α`; ties go to
/// the smaller index. `w` comes from the config's [`PenaltyScale`].
pub fn rank_variables(cov: &CovariancePair, config: &SelectionConfig, n: usize) -> Result<Ranking> {
    let p = cov.layout.p();
    if p < 2 {
        return Err(Error::argument("ranking needs at least 2 predictors"));
    }
    let xi = (0..p)
        .map(|l| {
            let k: Vec<usize> = (0..p).filter(|&i| i != l).collect();
            xi_blocks(&k, cov)
        })
        .collect::<Result<Vec<_>>>()?;
    let weight = config.scale.weight(cov.c12.norm());
    Ok(ranking_from_xi(xi, config, n, weight))
}

/// The ranking step given precomputed `ξ̂_{K_ℓ}` values and penalty weight.
pub fn ranking_from_xi(xi: Vec<f64>, config: &SelectionConfig, n: usize, weight: f64) -> Ranking {
    let scale = weight * (n as f64).powf(-config.alpha);
    let phi: Vec<f64> = xi
        .iter()
        .enumerate()
        .map(|(l, x)| x + config.f.value(l + 1) * scale)
        .collect();
    let mut ordered: Vec<usize> = (0..phi.len()).collect();
    ordered.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    Ranking { ordered, phi, xi }
}

fn check_permutation(ordered: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for &i in ordered {
        if i >= p || std::mem::replace(&mut seen[i], true) {
            return Err(Error::argument(
                "ordering must be a permutation of the predictors",
            ));
        }
    }
    if ordered.len() != p {
        return Err(Error::argument(
            "ordering must be a permutation of the predictors",
        ));
    }
    Ok(())
}

/// `D̂ = argmin_ℓ ψ̂_ℓ` with `ψ̂_ℓ = ξ̂_{Ĵ_ℓ} + w·g(ν̂_ℓ)/n^β`; the smallest
/// minimizer wins.
pub fn estimate_cardinality(
    cov: &CovariancePair,
    ordered: &[usize],
    config: &SelectionConfig,
    n: usize,
) -> Result<Cardinality> {
    check_permutation(ordered, cov.layout.p())?;
    let xi = (1..=ordered.len())
        .map(|len| {
            let mut prefix = ordered[..len].to_vec();
            prefix.sort_unstable();
            xi_blocks(&prefix, cov)
        })
        .collect::<Result<Vec<_>>>()?;
    let weight = config.scale.weight(cov.c12.norm());
    Ok(cardinality_from_xi(xi, ordered, config, n, weight))
}

/// The cardinality step given precomputed prefix criteria `ξ̂_{Ĵ_ℓ}`.
pub fn cardinality_from_xi(
    xi: Vec<f64>,
    ordered: &[usize],
    config: &SelectionConfig,
    n: usize,
    weight: f64,
) -> Cardinality {
    let scale = weight * (n as f64).powf(-config.beta);
    let psi: Vec<f64> = xi
        .iter()
        .zip(ordered)
        .map(|(x, &nu)| x + config.g.value(nu + 1) * scale)
        .collect();
    let mut best = 0;
    for (i, v) in psi.iter().enumerate().skip(1) {
        if *v < psi[best] {
            best = i;
        }
    }
    Cardinality {
        d_hat: best + 1,
        psi,
        xi,
    }
}

/// Selection from precomputed covariances.
pub fn select_from_covariances(
    cov: &CovariancePair,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    let p = cov.layout.p();
    let n = cov.n;
    let ranking = if p == 1 {
        let norm = cov.c12.norm();
        ranking_from_xi(vec![norm], config, n, config.scale.weight(norm))
    } else {
        rank_variables(cov, config, n).stage(|| "ranking".into())?
    };
    let card =
        estimate_cardinality(cov, &ranking.ordered, config, n).stage(|| "cardinality".into())?;
    let selected = VariableSubset::new(ranking.ordered[..card.d_hat].to_vec(), p)?;
    Ok(SelectionResult {
        ordered: ranking.ordered,
        phi: ranking.phi,
        psi: card.psi,
        d_hat: card.d_hat,
        selected,
    })
}

/// Covariances, ranking, cardinality, and the selected set
/// `{ν̂₁, …, ν̂_D̂}` for one `(α, β)`.
pub fn select_variables(
    design: &StackedDesign,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    let cov = covariances(design).stage(|| "covariances".into())?;
    select_from_covariances(&cov, config)
}
