use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sysmodel::{disturbance_maps, LtiSystem};

use crate::{DeviationData, IdentError};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverageFlag {
    pub case: usize,
    pub start: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageStep {
    pub step: usize,
    pub rank: usize,
    pub full_rank: bool,
    /// Largest `‖y_a − P y_a‖` over the windows, `P` the projector onto the
    /// range of the stacked noise map.
    pub max_residual: f64,
    pub flagged: Vec<CoverageFlag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub steps: Vec<CoverageStep>,
    pub covered: bool,
}

/// Checks, per step, whether the deviations lie in the range of
/// `J_k = [Ē_0, …, Ē_{k−1}, [0, F]]`.
///
/// With aggregated data only the stored extreme points are tested; the
/// residual norm is convex, so `max_residual` is still exact, while
/// `flagged` lists only extreme windows. `tol` is relative to `1 + ‖y_a‖`.
pub fn coverage_check(sys: &LtiSystem, data: &DeviationData, tol: f64) -> Result<CoverageReport, IdentError> {
    let q = sys.outputs();
    let maps = disturbance_maps(sys, data.k_end)?;
    // J_k J_kᵀ accumulates; its range equals the range of J_k.
    let mut gram = &maps.output_map * maps.output_map.transpose();
    let mut steps = Vec::with_capacity(data.k_end + 1);
    for k in 0..=data.k_end {
        if k > 0 {
            let e = &maps.state_maps[k - 1];
            gram += e * e.transpose();
        }
        let (rank, projector) = range_projector(&gram, q);
        let mut flagged = Vec::new();
        let mut max_residual: f64 = 0.0;
        let points: Vec<(DVector<f64>, usize)> = match data.raw() {
            Some(raw) => raw.iter().enumerate().filter(|(_, d)| d.ncols() > k).map(|(i, d)| (d.column(k).into_owned(), i)).collect(),
            None => data.extreme_points(k),
        };
        for (y, label) in points {
            let residual = (&y - &projector * &y).norm();
            max_residual = max_residual.max(residual);
            if residual > tol * (1.0 + y.norm()) {
                let w = data.windows[label];
                flagged.push(CoverageFlag { case: w.case, start: w.start, residual });
            }
        }
        steps.push(CoverageStep { step: k, rank, full_rank: rank == q, max_residual, flagged });
    }
    let covered = steps.iter().all(|s| s.flagged.is_empty());
    Ok(CoverageReport { steps, covered })
}

/// Rank and orthogonal projector onto the range of a PSD Gram matrix.
fn range_projector(gram: &DMatrix<f64>, q: usize) -> (usize, DMatrix<f64>) {
    let eig = gram.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut p = DMatrix::zeros(q, q);
    let mut rank = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        // Eigenvalues are squared singular values.
        if top > 0.0 && l > 1e-20 * top {
            let u = eig.eigenvectors.column(i);
            p += u * u.transpose();
            rank += 1;
        }
    }
    (rank, p)
}
