//! Stacked design vectors `(G₁X₁ | … | G_pX_p)` and their empirical
//! covariance and cross-covariance with the responses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::GramMatrix;
use crate::error::{Error, Result};
use crate::expansion::CoordinateVector;

/// Block sizes `d₁ … d_p` and their offsets in the stacked vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::argument(
                "block dimensions must be non-empty and positive",
            ));
        }
        let offsets = dims
            .iter()
            .scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        Ok(Self { dims, offsets })
    }

    pub fn p(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Column range of block `l` (0-based).
    pub fn range(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l]..self.offsets[l] + self.dims[l]
    }

    /// Stacked column indices of the blocks in `blocks`, in order.
    pub fn columns(&self, blocks: &[usize]) -> Vec<usize> {
        blocks.iter().flat_map(|&l| self.range(l)).collect()
    }
}

/// `n` stacked design rows with their responses.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedDesign {
    vectors: DMatrix<f64>,
    layout: BlockLayout,
    responses: DMatrix<f64>,
}

impl StackedDesign {
    pub fn new(
        vectors: DMatrix<f64>,
        layout: BlockLayout,
        responses: DMatrix<f64>,
    ) -> Result<Self> {
        if vectors.ncols() != layout.total() {
            return Err(Error::argument(format!(
                "design has {} columns but blocks sum to {}",
                vectors.ncols(),
                layout.total()
            )));
        }
        if vectors.nrows() != responses.nrows() {
            return Err(Error::argument(format!(
                "design has {} rows but responses have {}",
                vectors.nrows(),
                responses.nrows()
            )));
        }
        if responses.ncols() == 0 {
            return Err(Error::argument("at least one response is required"));
        }
        Ok(Self {
            vectors,
            layout,
            responses,
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn p(&self) -> usize {
        self.layout.p()
    }

    pub fn q(&self) -> usize {
        self.responses.ncols()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn responses(&self) -> &DMatrix<f64> {
        &self.responses
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn rows(&self, rows: &[usize]) -> Self {
        Self {
            vectors: self.vectors.select_rows(rows),
            layout: self.layout.clone(),
            responses: self.responses.select_rows(rows),
        }
    }
}

/// Empirical means, covariance `Ĉ₁` and cross-covariance `Ĉ₁₂` (divisor `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub c1: DMatrix<f64>,
    pub c12: DMatrix<f64>,
    pub mean_x: DVector<f64>,
    pub mean_y: DVector<f64>,
    pub layout: BlockLayout,
    pub n: usize,
}

/// Row `i` is the concatenation over `l` of `G_l · coords[i][l]`.
pub fn assemble_design(
    coords: &[Vec<CoordinateVector>],
    grams: &[GramMatrix],
    responses: &DMatrix<f64>,
) -> Result<StackedDesign> {
    let layout = BlockLayout::new(grams.iter().map(GramMatrix::dim).collect())?;
    if coords.len() != responses.nrows() {
        return Err(Error::argument(format!(
            "{} coordinate rows for {} responses",
            coords.len(),
            responses.nrows()
        )));
    }
    let mut vectors = DMatrix::zeros(coords.len(), layout.total());
    for (i, row) in coords.iter().enumerate() {
        if row.len() != grams.len() {
            return Err(Error::argument(format!(
                "sample {} has {} coordinate blocks, expected {}",
                i + 1,
                row.len(),
                grams.len()
            )));
        }
        for (l, (c, g)) in row.iter().zip(grams).enumerate() {
            if c.len() != g.dim() {
                return Err(Error::argument(format!(
                    "predictor {}: coordinate length {} does not match Gram dimension {}",
                    l + 1,
                    c.len(),
                    g.dim()
                )));
            }
            let block = g.matrix() * DVector::from_column_slice(c.as_slice());
            for (k, col) in layout.range(l).enumerate() {
                vectors[(i, col)] = block[k];
            }
        }
    }
    StackedDesign::new(vectors, layout, responses.clone())
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

fn centered(m: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Two-pass covariances: means first, then products of deviations.
pub fn covariances(design: &StackedDesign) -> Result<CovariancePair> {
    let n = design.n();
    if n < 2 {
        return Err(Error::argument(format!(
            "covariances need at least 2 samples, got {n}"
        )));
    }
    let mean_x = column_means(&design.vectors);
    let mean_y = column_means(&design.responses);
    let xc = centered(&design.vectors, &mean_x);
    let yc = centered(&design.responses, &mean_y);
    let mut c1 = xc.tr_mul(&xc) / n as f64;
    // exact symmetry
    for a in 0..c1.nrows() {
        for b in (a + 1)..c1.ncols() {
            let v = 0.5 * (c1[(a, b)] + c1[(b, a)]);
            c1[(a, b)] = v;
            c1[(b, a)] = v;
        }
    }
    let c12 = xc.tr_mul(&yc) / n as f64;
    Ok(CovariancePair {
        c1,
        c12,
        mean_x,
        mean_y,
        layout: design.layout.clone(),
        n,
    })
}
