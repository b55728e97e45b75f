//! In-memory functional datasets: `p` predictors observed on per-predictor
//! grids for `n` samples, plus an `n × q` response matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// All `n` sample curves of one functional predictor on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorCurves {
    grid: Vec<f64>,
    curves: Vec<Vec<f64>>,
}

impl PredictorCurves {
    pub fn new(grid: Vec<f64>, curves: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::argument("a predictor grid needs at least 2 points"));
        }
        if grid
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::argument(
                "predictor grid must be strictly increasing",
            ));
        }
        if let Some((i, c)) = curves
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != grid.len())
        {
            return Err(Error::argument(format!(
                "curve {} has {} values but the grid has {} points",
                i + 1,
                c.len(),
                grid.len()
            )));
        }
        if curves.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::argument("curve values must be finite"));
        }
        Ok(Self { grid, curves })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    predictors: Vec<PredictorCurves>,
    responses: DMatrix<f64>,
}

impl FunctionalDataset {
    pub fn new(predictors: Vec<PredictorCurves>, responses: DMatrix<f64>) -> Result<Self> {
        if predictors.is_empty() {
            return Err(Error::argument("dataset needs at least one predictor"));
        }
        if responses.ncols() == 0 {
            return Err(Error::argument("dataset needs at least one response"));
        }
        let n = responses.nrows();
        if let Some((l, p)) = predictors.iter().enumerate().find(|(_, p)| p.len() != n) {
            return Err(Error::argument(format!(
                "predictor {} has {} curves but there are {} responses",
                l + 1,
                p.len(),
                n
            )));
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("responses must be finite"));
        }
        Ok(Self {
            predictors,
            responses,
        })
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.responses.nrows()
    }

    /// Number of functional predictors.
    pub fn p(&self) -> usize {
        self.predictors.len()
    }

    /// Number of scalar responses.
    pub fn q(&self) -> usize {
        self.responses.ncols()
    }

    pub fn predictors(&self) -> &[PredictorCurves] {
        &self.predictors
    }

    pub fn predictor(&self, l: usize) -> &PredictorCurves {
        &self.predictors[l]
    }

    pub fn responses(&self) -> &DMatrix<f64> {
        &self.responses
    }

    /// Rows `rows` (in the given order) as a new dataset.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let predictors = self
            .predictors
            .iter()
            .map(|p| PredictorCurves {
                grid: p.grid.clone(),
                curves: rows.iter().map(|&i| p.curves[i].clone()).collect(),
            })
            .collect();
        let responses = self.responses.select_rows(rows);
        Self {
            predictors,
            responses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        let grid = vec![0.0, 0.5, 1.0];
        let p = PredictorCurves::new(grid.clone(), vec![vec![1.0, 2.0, 3.0]; 2]).unwrap();
        assert!(FunctionalDataset::new(vec![p.clone()], DMatrix::zeros(3, 1)).is_err());
        let ds = FunctionalDataset::new(vec![p], DMatrix::zeros(2, 1)).unwrap();
        assert_eq!((ds.n(), ds.p(), ds.q()), (2, 1, 1));
        assert!(PredictorCurves::new(grid, vec![vec![1.0]]).is_err());
        assert!(PredictorCurves::new(vec![0.0, 0.0], vec![]).is_err());
    }

    #[test]
    fn subset_reorders() {
        let grid = vec![0.0, 1.0];
        let p = PredictorCurves::new(grid, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]])
            .unwrap();
        let y = DMatrix::from_column_slice(3, 1, &[0.0, 10.0, 20.0]);
        let ds = FunctionalDataset::new(vec![p], y).unwrap();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.predictor(0).curves()[0], vec![2.0, 2.0]);
        assert_eq!(sub.responses()[(1, 0)], 0.0);
    }
}
