use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::{Polytope, SetError, Zonotope};

/// Highest ambient dimension for facet enumeration.
pub const MAX_FACET_DIM: usize = 4;

/// Cross products of unit generators shorter than this are treated as degenerate.
const DEGENERATE_CROSS: f64 = 1e-12;

/// Generalized cross product of an `n × (n−1)` matrix: entry `j` is
/// `(−1)^j det(H without row j)` (zero-based), orthogonal to every column.
pub fn cross_nx(h: &DMatrix<f64>) -> Result<DVector<f64>, SetError> {
    let n = h.nrows();
    if n == 0 || h.ncols() + 1 != n {
        return Err(SetError::Invalid(format!("cross product needs n×(n−1), got {}×{}", n, h.ncols())));
    }
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    Ok(DVector::from_fn(n, |j, _| {
        let rows: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let minor = h.select_rows(&rows).determinant();
        if j % 2 == 0 {
            minor
        } else {
            -minor
        }
    }))
}

/// Halfspace form `[N⁺; −N⁺] x ≤ [N⁺c + Δd; −N⁺c + Δd]` with unit rows.
///
/// Normals come from every choice of `n−1` non-zero generators; choices
/// whose unit-column cross product is below `1e−12` are skipped, which only
/// drops redundant halfspaces. Rank-deficient zonotopes therefore get an
/// outer description.
pub fn halfspace_rep(z: &Zonotope) -> Result<Polytope, SetError> {
    let n = z.dim();
    if n > MAX_FACET_DIM {
        return Err(SetError::TooManyDimensions(n));
    }
    let g = nonzero_columns(&z.generators());
    let p = g.ncols();
    if n >= 2 && p < n - 1 {
        return Err(SetError::Degenerate { dim: n, generators: p });
    }
    let normals = if n == 0 { Vec::new() } else { facet_normals(&unit_columns(&g)) };
    if n >= 1 && normals.is_empty() {
        return Err(SetError::Degenerate { dim: n, generators: p });
    }
    Ok(assemble(&normals, z.center(), &g))
}

/// Unit directions (one per `±` pair) whose support rows describe the
/// zonotope generated by `templates` exactly, for any non-negative scales
/// that keep every column active.
///
/// Full-rank templates give their facet normals. Rank-deficient templates
/// give an orthonormal basis of the complement of their span plus the facet
/// normals of the templates projected into that span.
pub fn constraint_normals(templates: &DMatrix<f64>) -> Result<Vec<DVector<f64>>, SetError> {
    let n = templates.nrows();
    if n > MAX_FACET_DIM {
        return Err(SetError::TooManyDimensions(n));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let cols = unit_columns(&nonzero_columns(templates));
    if cols.ncols() == 0 {
        return Ok((0..n).map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect());
    }
    let svd = cols.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > 1e-10 * smax.max(1.0)).count();
    if rank == n {
        return Ok(facet_normals(&cols));
    }

    // Orthonormal span basis from the SVD; complement by Gram–Schmidt completion.
    let span: Vec<DVector<f64>> = order[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
    let complement = orthogonal_complement(&span, n);
    let basis = DMatrix::from_columns(&span);
    let projected = basis.tr_mul(&cols);
    let mut out = complement;
    for m in constraint_normals(&projected)? {
        out.push(canonical(&basis * m));
    }
    Ok(out)
}

/// Support-function test: `n_j·c + Σ_h |n_j·g_h| ≤ d_j + tol` for every row.
pub fn zonotope_in_polytope(z: &Zonotope, p: &Polytope, tol: f64) -> bool {
    z.dim() == p.dim() && containment_margin(z, p) <= tol
}

/// `max_j (support_Z(n_j) − d_j)`; non-positive iff the zonotope lies inside.
pub fn containment_margin(z: &Zonotope, p: &Polytope) -> f64 {
    let g = z.generators();
    (0..p.num_rows())
        .map(|j| {
            let v: DVector<f64> = p.normals().row(j).transpose();
            let (nc, spread) = support_parts(&v, z.center(), &g);
            nc + spread - p.offsets()[j]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(v·c, Σ_h |v·g_h|)`, shared by facet assembly and the containment test so
/// that a zonotope lies in its own halfspace form with zero tolerance.
fn support_parts(v: &DVector<f64>, center: &DVector<f64>, g: &DMatrix<f64>) -> (f64, f64) {
    let nc = v.dot(center);
    let spread = g.column_iter().map(|col| v.dot(&col).abs()).sum();
    (nc, spread)
}

fn nonzero_columns(g: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..g.ncols()).filter(|&h| g.column(h).amax() > 0.0).collect();
    g.select_columns(&keep)
}

fn unit_columns(g: &DMatrix<f64>) -> DMatrix<f64> {
    let mut u = g.clone();
    for mut c in u.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    u
}

/// Unique unit facet normals (one per ± pair) from all `(n−1)`-subsets of unit columns.
fn facet_normals(cols: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = cols.nrows();
    let p = cols.ncols();
    if n == 1 {
        return vec![DVector::from_element(1, 1.0)];
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for subset in Combinations::new(p, n - 1) {
        let h = cols.select_columns(&subset);
        let v = cross_nx(&h).expect("subset has n−1 columns");
        let norm = v.norm();
        if norm < DEGENERATE_CROSS {
            continue;
        }
        let v = canonical(v / norm);
        if seen.insert(direction_key(&v)) {
            out.push(v);
        }
    }
    out
}

fn assemble(normals: &[DVector<f64>], center: &DVector<f64>, g: &DMatrix<f64>) -> Polytope {
    let n = center.len();
    let r = normals.len();
    let mut nm = DMatrix::zeros(2 * r, n);
    let mut d = DVector::zeros(2 * r);
    for (j, v) in normals.iter().enumerate() {
        let (nc, spread) = support_parts(v, center, g);
        nm.row_mut(j).copy_from(&v.transpose());
        nm.row_mut(r + j).copy_from(&(-v).transpose());
        d[j] = nc + spread;
        d[r + j] = -nc + spread;
    }
    Polytope::new(nm, d).expect("row counts agree")
}

/// Sign convention: the first clearly non-zero component is positive.
fn canonical(v: DVector<f64>) -> DVector<f64> {
    match v.iter().find(|x| x.abs() > 1e-12) {
        Some(x) if *x < 0.0 => -v,
        _ => v,
    }
}

fn direction_key(v: &DVector<f64>) -> Vec<i64> {
    v.iter().map(|x| (x * 1e9).round() as i64).collect()
}

fn orthogonal_complement(span: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = span.to_vec();
    let mut out = Vec::new();
    for i in 0..n {
        let mut e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        // Two Gram–Schmidt passes for numerical orthogonality.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&e);
                e.axpy(-c, b, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-6 {
            e /= norm;
            basis.push(e.clone());
            out.push(canonical(e));
            if basis.len() == n {
                break;
            }
        }
    }
    out
}

/// Lexicographic `k`-subsets of `0..p`.
struct Combinations {
    p: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(p: usize, k: usize) -> Self {
        Self { p, idx: (0..k).collect(), done: k > p }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.p - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn cross_product_examples() {
        assert_eq!(cross_nx(&dmatrix![1.0; 0.0]).unwrap(), dvector![0.0, -1.0]);
        let h = DMatrix::identity(3, 3).columns(0, 2).into_owned();
        assert_eq!(cross_nx(&h).unwrap(), dvector![0.0, 0.0, 1.0]);
        assert!(cross_nx(&DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(1, 2).count(), 0);
    }

    #[test]
    fn unit_box_rows() {
        let z = Zonotope::from_generators(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let p = halfspace_rep(&z).unwrap();
        assert_eq!(p.num_rows(), 4);
        assert!(p.offsets().iter().all(|d| (d - 1.0).abs() < 1e-15));
        let shifted = z.with_center(dvector![1.0, 1.0]).unwrap();
        let p = halfspace_rep(&shifted).unwrap();
        let mut offs: Vec<f64> = p.offsets().iter().copied().collect();
        offs.sort_by(f64::total_cmp);
        assert_eq!(offs, vec![0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn too_few_generators_is_degenerate() {
        let z = Zonotope::from_generators(dvector![0.0, 0.0, 0.0], dmatrix![1.0; 0.0; 0.0]).unwrap();
        assert!(matches!(halfspace_rep(&z), Err(SetError::Degenerate { .. })));
        assert!(matches!(halfspace_rep(&Zonotope::origin(5)), Err(SetError::TooManyDimensions(5))));
    }

    #[test]
    fn flat_templates_get_complement_normals() {
        // A segment along [1, 1] in the plane.
        let normals = constraint_normals(&dmatrix![1.0; 1.0]).unwrap();
        assert_eq!(normals.len(), 2);
        let s = 0.5f64.sqrt();
        assert!(normals.iter().any(|v| (v - dvector![s, -s]).amax() < 1e-12));
        assert!(normals.iter().any(|v| (v - dvector![s, s]).amax() < 1e-12));
        // No generators at all: every axis pins the point.
        assert_eq!(constraint_normals(&DMatrix::zeros(2, 0)).unwrap().len(), 2);
    }

    #[test]
    fn containment_examples() {
        let unit = Polytope::from_interval(&crate::Interval::symmetric(&[1.0, 1.0]).unwrap());
        let half = Zonotope::from_generators(dvector![0.0, 0.0], 0.5 * DMatrix::identity(2, 2)).unwrap();
        assert!(zonotope_in_polytope(&half, &unit, 1e-9));
        let small = Polytope::from_interval(&crate::Interval::symmetric(&[0.9, 0.9]).unwrap());
        let full = Zonotope::from_generators(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert!(!zonotope_in_polytope(&full, &small, 1e-9));
        assert!((containment_margin(&full, &small) - 0.1).abs() < 1e-12);
    }
}
