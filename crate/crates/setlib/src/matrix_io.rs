//! Conversions between nalgebra matrices and nested `Vec`s for serialization.

use nalgebra::{DMatrix, DVector};

/// Row-major nested representation.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Column-major nested representation (one inner `Vec` per column).
pub fn to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Builds a matrix from rows; `ncols` is needed when there are no rows.
pub fn from_rows(rows: &[Vec<f64>], ncols: Option<usize>) -> Result<DMatrix<f64>, String> {
    let width = rows.first().map(Vec::len).or(ncols).unwrap_or(0);
    if rows.iter().any(|r| r.len() != width) {
        return Err("ragged matrix rows".into());
    }
    if let Some(n) = ncols {
        if !rows.is_empty() && n != width {
            return Err(format!("expected {n} columns, found {width}"));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), width, &flat))
}

/// Builds a matrix from columns; `nrows` is needed when there are no columns.
pub fn from_columns(cols: &[Vec<f64>], nrows: usize) -> Result<DMatrix<f64>, String> {
    if cols.iter().any(|c| c.len() != nrows) {
        return Err(format!("every column must have {nrows} entries"));
    }
    let flat: Vec<f64> = cols.iter().flatten().copied().collect();
    Ok(DMatrix::from_column_slice(nrows, cols.len(), &flat))
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
