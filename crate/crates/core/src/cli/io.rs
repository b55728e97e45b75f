//! CSV data files.
//!
//! A curves file holds one predictor: the first row is the grid, every
//! following row is one sample curve on that grid. The responses file has
//! one row per sample and one column per response. Blank lines and lines
//! starting with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::Failure;
use crate::data::{FunctionalDataset, PredictorCurves};

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, Failure> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Numeric rows of a CSV file, each tagged with its line number.
fn numeric_rows(path: &Path) -> Result<Vec<(u64, Vec<f64>)>, Failure> {
    let mut rows = Vec::new();
    for record in reader(path)?.records() {
        let record = record.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    Failure::usage(format!(
                        "{}: line {line}, column {}: '{field}' is not a number",
                        path.display(),
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn check_width(path: &Path, rows: &[(u64, Vec<f64>)], width: usize) -> Result<(), Failure> {
    match rows.iter().find(|(_, r)| r.len() != width) {
        Some((line, r)) => Err(Failure::usage(format!(
            "{}: line {line} has {} fields, expected {width}",
            path.display(),
            r.len()
        ))),
        None => Ok(()),
    }
}

pub fn read_curves(path: &Path) -> Result<PredictorCurves, Failure> {
    let mut rows = numeric_rows(path)?;
    if rows.len() < 2 {
        return Err(Failure::usage(format!(
            "{}: need a grid row and at least one curve",
            path.display()
        )));
    }
    let width = rows[0].1.len();
    check_width(path, &rows, width)?;
    let grid = rows.remove(0).1;
    let curves = rows.into_iter().map(|(_, r)| r).collect();
    PredictorCurves::new(grid, curves)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn read_responses(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let rows = numeric_rows(path)?;
    if rows.is_empty() {
        return Err(Failure::usage(format!("{}: no responses", path.display())));
    }
    let q = rows[0].1.len();
    check_width(path, &rows, q)?;
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        q,
        rows.into_iter().flat_map(|(_, r)| r),
    ))
}

pub fn read_dataset(curves: &[PathBuf], responses: &Path) -> Result<FunctionalDataset, Failure> {
    if curves.is_empty() {
        return Err(Failure::usage("no curve files given"));
    }
    let predictors = curves
        .iter()
        .map(|p| read_curves(p))
        .collect::<Result<Vec<_>, _>>()?;
    let y = read_responses(responses)?;
    FunctionalDataset::new(predictors, y).map_err(Failure::from)
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Write `x1.csv … xp.csv` and `y.csv` into `dir`. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_dataset(
    dataset: &FunctionalDataset,
    dir: &Path,
) -> Result<(Vec<PathBuf>, PathBuf), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let mut curve_paths = Vec::with_capacity(dataset.p());
    for (l, pred) in dataset.predictors().iter().enumerate() {
        let mut text = join(pred.grid().iter().copied()) + "\n";
        for c in pred.curves() {
            text += &join(c.iter().copied());
            text.push('\n');
        }
        let path = dir.join(format!("x{}.csv", l + 1));
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        curve_paths.push(path);
    }
    let y = dataset.responses();
    let text: String = y
        .row_iter()
        .map(|r| join(r.iter().copied()) + "\n")
        .collect();
    let path = dir.join("y.csv");
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
    Ok((curve_paths, path))
}
