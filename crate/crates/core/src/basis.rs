//! Basis families on an interval, their evaluation on grids, and Gram
//! matrices of pairwise L2 inner products.
//!
//! Three families are supported:
//!
//! * a cosine Fourier system `1, √2 cos(π u), √2 cos(2π u), …` on the
//!   rescaled coordinate `u = (t - lo) / (hi - lo)`, normalized so the
//!   Gram matrix is the identity on any interval;
//! * clamped B-splines of a given order on equispaced interior knots;
//! * Gaussian radial functions `exp(-(t - c)² / (2 γ σ²))`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Default B-spline order (cubic).
pub const DEFAULT_BSPLINE_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::argument(format!(
                "interval requires finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn slack(&self) -> f64 {
        1e-12 * self.width().max(self.lo.abs()).max(self.hi.abs())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo - self.slack() && t <= self.hi + self.slack()
    }
}

/// Family-specific parameters of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisFamily {
    Fourier,
    BSpline {
        order: usize,
    },
    GaussianRadial {
        centers: Vec<f64>,
        widths: Vec<f64>,
        scale: f64,
    },
}

/// A fully parameterized basis of a given dimension on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    family: BasisFamily,
    dimension: usize,
    interval: Interval,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, dimension: usize, interval: Interval) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::argument("basis dimension must be at least 1"));
        }
        match &family {
            BasisFamily::Fourier => {}
            BasisFamily::BSpline { order } => {
                if *order == 0 {
                    return Err(Error::argument("B-spline order must be at least 1"));
                }
                if dimension < *order {
                    return Err(Error::argument(format!(
                        "B-spline dimension {dimension} is below its order {order}"
                    )));
                }
            }
            BasisFamily::GaussianRadial {
                centers,
                widths,
                scale,
            } => {
                if centers.len() != dimension || widths.len() != dimension {
                    return Err(Error::argument(format!(
                        "Gaussian basis of dimension {dimension} needs {dimension} centers and widths, got {} and {}",
                        centers.len(),
                        widths.len()
                    )));
                }
                if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::argument("Gaussian widths must be positive"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::argument("Gaussian scale must be positive"));
                }
                if centers.iter().any(|c| !c.is_finite()) {
                    return Err(Error::argument("Gaussian centers must be finite"));
                }
            }
        }
        Ok(Self {
            family,
            dimension,
            interval,
        })
    }

    pub fn fourier(dimension: usize, interval: Interval) -> Result<Self> {
        Self::new(BasisFamily::Fourier, dimension, interval)
    }

    pub fn bspline(dimension: usize, order: usize, interval: Interval) -> Result<Self> {
        Self::new(BasisFamily::BSpline { order }, dimension, interval)
    }

    /// Gaussian basis with equispaced centers, widths equal to the center
    /// spacing and unit scale.
    pub fn gaussian_default(dimension: usize, interval: Interval) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::argument("basis dimension must be at least 1"));
        }
        let (centers, spacing) = if dimension == 1 {
            (vec![0.5 * (interval.lo + interval.hi)], interval.width())
        } else {
            let h = interval.width() / (dimension - 1) as f64;
            (
                (0..dimension).map(|k| interval.lo + k as f64 * h).collect(),
                h,
            )
        };
        Self::new(
            BasisFamily::GaussianRadial {
                centers,
                widths: vec![spacing; dimension],
                scale: 1.0,
            },
            dimension,
            interval,
        )
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }
}

/// The family kind without dimension-dependent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Fourier,
    #[serde(rename = "bspline")]
    BSpline,
    Gaussian,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Fourier => "fourier",
            FamilyKind::BSpline => "bspline",
            FamilyKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fourier" => Ok(FamilyKind::Fourier),
            "bspline" | "b-spline" | "spline" => Ok(FamilyKind::BSpline),
            "gaussian" | "gauss" => Ok(FamilyKind::Gaussian),
            other => Err(Error::argument(format!("unknown basis family '{other}'"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A basis family on an interval whose dimension is chosen later (by BIC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisTemplate {
    pub kind: FamilyKind,
    pub interval: Interval,
    pub bspline_order: usize,
}

impl BasisTemplate {
    pub fn new(kind: FamilyKind, interval: Interval) -> Self {
        Self {
            kind,
            interval,
            bspline_order: DEFAULT_BSPLINE_ORDER,
        }
    }

    /// Smallest dimension this family admits.
    pub fn min_dimension(&self) -> usize {
        match self.kind {
            FamilyKind::BSpline => self.bspline_order,
            _ => 1,
        }
    }

    pub fn with_dimension(&self, dimension: usize) -> Result<BasisSpec> {
        match self.kind {
            FamilyKind::Fourier => BasisSpec::fourier(dimension, self.interval),
            FamilyKind::BSpline => BasisSpec::bspline(dimension, self.bspline_order, self.interval),
            FamilyKind::Gaussian => BasisSpec::gaussian_default(dimension, self.interval),
        }
    }
}

/// Gram matrix of a basis: `g[k][m] = ∫ φ_k φ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    /// Wrap a matrix after checking symmetry and positive semidefiniteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::argument("Gram matrix must be square"));
        }
        let scale = 1.0 + crate::linalg::max_abs(&entries);
        let asym = crate::linalg::max_abs(&(&entries - entries.transpose()));
        if asym > 1e-12 * scale {
            return Err(Error::numerical(format!(
                "Gram matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let trace = entries.trace();
        let min_eig = SymmetricEigen::new(entries.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(*v));
        if min_eig < -1e-10 * trace.abs() {
            return Err(Error::numerical(format!(
                "Gram matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self(entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Check a grid against an interval.
pub fn validate_grid(grid: &[f64], interval: Interval) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::argument("grid is empty"));
    }
    if grid.len() < 2 {
        return Err(Error::argument("grid needs at least 2 points"));
    }
    if let Some(&bad) = grid.iter().find(|t| !interval.contains(**t)) {
        return Err(Error::Domain {
            value: bad,
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    if grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::argument("grid must be strictly increasing"));
    }
    Ok(())
}

/// Evaluate every basis function at every grid point: an `N × d` matrix.
pub fn eval_basis(spec: &BasisSpec, grid: &[f64]) -> Result<DMatrix<f64>> {
    validate_grid(grid, spec.interval)?;
    let n = grid.len();
    let d = spec.dimension;
    let iv = spec.interval;
    let mut out = DMatrix::zeros(n, d);
    match &spec.family {
        BasisFamily::Fourier => {
            let norm = 1.0 / iv.width().sqrt();
            for (r, &t) in grid.iter().enumerate() {
                let u = (t - iv.lo) / iv.width();
                out[(r, 0)] = norm;
                for k in 1..d {
                    out[(r, k)] = norm * SQRT_2 * (k as f64 * PI * u).cos();
                }
            }
        }
        BasisFamily::BSpline { order } => {
            let knots = clamped_knots(iv, d, *order);
            let mut local = vec![0.0; *order];
            for (r, &t) in grid.iter().enumerate() {
                let t = t.clamp(iv.lo, iv.hi);
                let span = find_span(&knots, d, *order, t);
                bspline_nonzero(&knots, *order, span, t, &mut local);
                for (j, v) in local.iter().enumerate() {
                    out[(r, span + 1 - order + j)] = *v;
                }
            }
        }
        BasisFamily::GaussianRadial {
            centers,
            widths,
            scale,
        } => {
            for (r, &t) in grid.iter().enumerate() {
                for k in 0..d {
                    let z = t - centers[k];
                    out[(r, k)] = (-(z * z) / (2.0 * scale * widths[k] * widths[k])).exp();
                }
            }
        }
    }
    Ok(out)
}

/// Gram matrix of `spec`. Fourier and Gaussian use their analytic forms and
/// ignore `grid`; B-splines use the trapezoidal rule on `grid`.
pub fn gram(spec: &BasisSpec, grid: &[f64]) -> Result<GramMatrix> {
    let d = spec.dimension;
    match &spec.family {
        BasisFamily::Fourier => Ok(GramMatrix::identity(d)),
        BasisFamily::BSpline { .. } => {
            let phi = eval_basis(spec, grid)?;
            let weights = trapezoid_weights(grid);
            let mut g = DMatrix::zeros(d, d);
            for k in 0..d {
                for m in k..d {
                    let v: f64 = (0..grid.len())
                        .map(|r| weights[r] * phi[(r, k)] * phi[(r, m)])
                        .sum();
                    g[(k, m)] = v;
                    g[(m, k)] = v;
                }
            }
            GramMatrix::new(g)
        }
        BasisFamily::GaussianRadial {
            centers,
            widths,
            scale,
        } => {
            let mut g = DMatrix::zeros(d, d);
            let root_two_pi = (2.0 * PI).sqrt();
            for k in 0..d {
                for m in k..d {
                    let s2 = widths[k] * widths[k] + widths[m] * widths[m];
                    let dc = centers[k] - centers[m];
                    let v = root_two_pi * widths[k] * widths[m] / s2.sqrt()
                        * (-(dc * dc) / (2.0 * scale * s2)).exp();
                    g[(k, m)] = v;
                    g[(m, k)] = v;
                }
            }
            GramMatrix::new(g)
        }
    }
}

/// Trapezoidal quadrature weights on a (possibly non-uniform) grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for r in 0..n.saturating_sub(1) {
        let h = 0.5 * (grid[r + 1] - grid[r]);
        w[r] += h;
        w[r + 1] += h;
    }
    w
}

/// Clamped knot vector: `order` copies of each endpoint plus `d - order`
/// equispaced interior knots.
fn clamped_knots(iv: Interval, d: usize, order: usize) -> Vec<f64> {
    let interior = d - order;
    let mut knots = Vec::with_capacity(d + order);
    knots.extend(std::iter::repeat_n(iv.lo, order));
    let h = iv.width() / (interior + 1) as f64;
    knots.extend((1..=interior).map(|j| iv.lo + j as f64 * h));
    knots.extend(std::iter::repeat_n(iv.hi, order));
    knots
}

/// Knot span `j` with `knots[j] <= t < knots[j + 1]`; the right endpoint
/// belongs to the last non-empty span.
fn find_span(knots: &[f64], d: usize, order: usize, t: f64) -> usize {
    let (low, high) = (order - 1, d - 1);
    if t >= knots[high + 1] {
        return high;
    }
    // knots[low..=high+1] is sorted; pick the last span start <= t.
    let pos = knots[low..=high + 1].partition_point(|k| *k <= t);
    (low + pos - 1).clamp(low, high)
}

/// The `order` B-spline values that may be nonzero on `span`, written into `out`
/// (Cox-de Boor triangular recursion).
fn bspline_nonzero(knots: &[f64], order: usize, span: usize, t: f64, out: &mut [f64]) {
    let degree = order - 1;
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    out[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { out[r] / denom } else { 0.0 };
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn fourier_first_column_is_constant() {
        let spec = BasisSpec::fourier(1, Interval::unit()).unwrap();
        let phi = eval_basis(&spec, &uniform(7)).unwrap();
        assert!(phi.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn fourier_row_at_zero() {
        let spec = BasisSpec::fourier(3, Interval::unit()).unwrap();
        let phi = eval_basis(&spec, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(phi[(0, 0)], 1.0);
        assert_abs_diff_eq!(phi[(0, 1)], SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[(0, 2)], SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_is_one_at_center() {
        let spec = BasisSpec::gaussian_default(5, Interval::unit()).unwrap();
        let BasisFamily::GaussianRadial { centers, .. } = spec.family().clone() else {
            unreachable!()
        };
        let phi = eval_basis(&spec, &centers).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(phi[(k, k)], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bsplines_partition_unity() {
        let spec = BasisSpec::bspline(9, 4, Interval::new(-1.0, 2.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| -1.0 + 3.0 * i as f64 / 39.0).collect();
        let phi = eval_basis(&spec, &grid).unwrap();
        for r in 0..grid.len() {
            let s: f64 = phi.row(r).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
            assert!(phi.row(r).iter().all(|v| *v >= -1e-15));
        }
        // clamped ends: first/last basis functions interpolate the endpoints
        assert_abs_diff_eq!(phi[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[(39, 8)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn order_one_single_function_gram_is_one() {
        let spec = BasisSpec::bspline(1, 1, Interval::unit()).unwrap();
        let g = gram(&spec, &uniform(11)).unwrap();
        assert_abs_diff_eq!(g.matrix()[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn fourier_gram_is_identity() {
        let spec = BasisSpec::fourier(4, Interval::new(2.0, 7.0).unwrap()).unwrap();
        let g = gram(&spec, &[]).unwrap();
        assert_eq!(g.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn gaussian_equal_widths_diagonal() {
        let sigma = 0.3;
        let spec = BasisSpec::new(
            BasisFamily::GaussianRadial {
                centers: vec![0.5, 0.5],
                widths: vec![sigma, sigma],
                scale: 1.0,
            },
            2,
            Interval::unit(),
        )
        .unwrap();
        let g = gram(&spec, &[]).unwrap();
        let expected = (2.0 * PI).sqrt() * sigma * sigma / (sigma * SQRT_2);
        assert_abs_diff_eq!(expected, sigma * PI.sqrt(), epsilon = 1e-15);
        for v in g.matrix().iter() {
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(BasisSpec::fourier(0, Interval::unit()).is_err());
        assert!(BasisSpec::bspline(3, 4, Interval::unit()).is_err());
        assert!(BasisSpec::new(
            BasisFamily::GaussianRadial {
                centers: vec![0.0],
                widths: vec![1.0, 1.0],
                scale: 1.0
            },
            1,
            Interval::unit()
        )
        .is_err());
    }

    #[test]
    fn grid_errors() {
        let spec = BasisSpec::fourier(2, Interval::unit()).unwrap();
        assert!(matches!(eval_basis(&spec, &[]), Err(Error::Argument(_))));
        assert!(matches!(
            eval_basis(&spec, &[0.0, 1.5]),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            eval_basis(&spec, &[0.5, 0.2]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn non_psd_gram_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GramMatrix::new(m).unwrap_err().is_numerical());
    }
}
