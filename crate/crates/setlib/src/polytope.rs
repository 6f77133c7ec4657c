use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{check_dim, matrix_io, Interval, SetError};

/// `{ x : N x ≤ d }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson", into = "PolytopeJson")]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl Polytope {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self, SetError> {
        check_dim("polytope offsets", normals.nrows(), offsets.len())?;
        Ok(Self { normals, offsets })
    }

    pub fn from_interval(interval: &Interval) -> Self {
        let n = interval.dim();
        let mut normals = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for i in 0..n {
            normals[(i, i)] = 1.0;
            offsets[i] = interval.upper()[i];
            normals[(n + i, i)] = -1.0;
            offsets[n + i] = -interval.lower()[i];
        }
        Self { normals, offsets }
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Largest `n_j·x − d_j`; positive means outside.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        (&self.normals * x - &self.offsets).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (self.num_rows() == 0 || self.margin(x) <= tol)
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    /// Row-major.
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl From<Polytope> for PolytopeJson {
    fn from(p: Polytope) -> Self {
        Self { normals: matrix_io::to_rows(&p.normals), offsets: p.offsets.iter().copied().collect() }
    }
}

impl TryFrom<PolytopeJson> for Polytope {
    type Error = SetError;

    fn try_from(j: PolytopeJson) -> Result<Self, SetError> {
        let n = matrix_io::from_rows(&j.normals, None).map_err(SetError::Invalid)?;
        Polytope::new(n, DVector::from_vec(j.offsets))
    }
}
