use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::matrix_io;
use crate::{check_dim, halfspace_rep, Interval, SetError};

/// `{ c + Σ_h β_h α_h g'_h : β ∈ [−1, 1]^p }`.
///
/// Scales are non-negative and there is one per template column. Zero scales
/// are kept (they contribute nothing) so that identification can treat every
/// scale as a free variable; [`Zonotope::compact`] drops them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZonotopeJson", into = "ZonotopeJson")]
pub struct Zonotope {
    center: DVector<f64>,
    templates: DMatrix<f64>,
    scales: DVector<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, templates: DMatrix<f64>, scales: DVector<f64>) -> Result<Self, SetError> {
        check_dim("zonotope templates (rows)", center.len(), templates.nrows())?;
        check_dim("zonotope scales", templates.ncols(), scales.len())?;
        if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(SetError::Invalid("scales must be finite and non-negative".into()));
        }
        if center.iter().chain(templates.iter()).any(|v| !v.is_finite()) {
            return Err(SetError::Invalid("zonotope entries must be finite".into()));
        }
        Ok(Self { center, templates, scales })
    }

    /// Unit scales: the templates are the generators.
    pub fn from_generators(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self, SetError> {
        let p = generators.ncols();
        Self::new(center, generators, DVector::from_element(p, 1.0))
    }

    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self { center, templates: DMatrix::zeros(n, 0), scales: DVector::zeros(0) }
    }

    pub fn origin(n: usize) -> Self {
        Self::point(DVector::zeros(n))
    }

    /// Axis-aligned box: identity templates scaled by the half widths.
    pub fn from_interval(interval: &Interval) -> Self {
        let n = interval.dim();
        Self { center: interval.center(), templates: DMatrix::identity(n, n), scales: interval.half_widths() }
    }

    /// `c + [−h, h]` with identity templates.
    pub fn centered_box(center: DVector<f64>, half_widths: &[f64]) -> Result<Self, SetError> {
        check_dim("box half widths", center.len(), half_widths.len())?;
        let n = center.len();
        Self::new(center, DMatrix::identity(n, n), DVector::from_column_slice(half_widths))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.scales.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn templates(&self) -> &DMatrix<f64> {
        &self.templates
    }

    pub fn scales(&self) -> &DVector<f64> {
        &self.scales
    }

    /// Effective generators `G' diag(α)`.
    pub fn generators(&self) -> DMatrix<f64> {
        let mut g = self.templates.clone();
        for (mut col, s) in g.column_iter_mut().zip(self.scales.iter()) {
            col *= *s;
        }
        g
    }

    pub fn with_center(&self, center: DVector<f64>) -> Result<Self, SetError> {
        Self::new(center, self.templates.clone(), self.scales.clone())
    }

    pub fn with_scales(&self, scales: DVector<f64>) -> Result<Self, SetError> {
        Self::new(self.center.clone(), self.templates.clone(), scales)
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Self, SetError> {
        check_dim("minkowski sum", self.dim(), other.dim())?;
        let n = self.dim();
        let (p1, p2) = (self.num_generators(), other.num_generators());
        let mut templates = DMatrix::zeros(n, p1 + p2);
        templates.columns_mut(0, p1).copy_from(&self.templates);
        templates.columns_mut(p1, p2).copy_from(&other.templates);
        let scales = DVector::from_iterator(p1 + p2, self.scales.iter().chain(other.scales.iter()).copied());
        Ok(Self { center: &self.center + &other.center, templates, scales })
    }

    /// `M Z`, keeping the scales.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Self, SetError> {
        check_dim("linear map", self.dim(), m.ncols())?;
        Ok(Self { center: m * &self.center, templates: m * &self.templates, scales: self.scales.clone() })
    }

    pub fn translate(&self, offset: &DVector<f64>) -> Result<Self, SetError> {
        check_dim("translation", self.dim(), offset.len())?;
        Ok(Self { center: &self.center + offset, templates: self.templates.clone(), scales: self.scales.clone() })
    }

    /// `Z1 × Z2` with block-diagonal templates.
    pub fn cartesian_product(&self, other: &Zonotope) -> Self {
        let (n1, n2) = (self.dim(), other.dim());
        let (p1, p2) = (self.num_generators(), other.num_generators());
        let mut templates = DMatrix::zeros(n1 + n2, p1 + p2);
        templates.view_mut((0, 0), (n1, p1)).copy_from(&self.templates);
        templates.view_mut((n1, p1), (n2, p2)).copy_from(&other.templates);
        Self {
            center: DVector::from_iterator(n1 + n2, self.center.iter().chain(other.center.iter()).copied()),
            templates,
            scales: DVector::from_iterator(p1 + p2, self.scales.iter().chain(other.scales.iter()).copied()),
        }
    }

    /// Half side lengths of the interval hull, `Σ_h |α_h g'_h|`.
    pub fn half_widths(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim());
        for (col, s) in self.templates.column_iter().zip(self.scales.iter()) {
            for i in 0..d.len() {
                d[i] += (col[i] * s).abs();
            }
        }
        d
    }

    pub fn interval_hull(&self) -> Interval {
        let d = self.half_widths();
        Interval::new(&self.center - &d, &self.center + &d).expect("hull bounds are ordered")
    }

    /// Sum of the interval-hull half side lengths, `‖δg‖₁`.
    pub fn znorm(&self) -> f64 {
        self.half_widths().sum()
    }

    /// Sum of the full side lengths of the interval hull, `2 ‖δg‖₁`.
    pub fn hull_side_sum(&self) -> f64 {
        2.0 * self.znorm()
    }

    /// `max_{x∈Z} dir·x`.
    pub fn support(&self, dir: &DVector<f64>) -> f64 {
        let proj = self.templates.tr_mul(dir);
        dir.dot(&self.center) + proj.iter().zip(self.scales.iter()).map(|(p, s)| (p * s).abs()).sum::<f64>()
    }

    /// `c + G β` for coefficients `β` (not clamped).
    pub fn point_at(&self, beta: &[f64]) -> DVector<f64> {
        let mut x = self.center.clone();
        for ((col, s), b) in self.templates.column_iter().zip(self.scales.iter()).zip(beta) {
            x.axpy(s * b, &col, 1.0);
        }
        x
    }

    /// Drops generators whose effective column is zero.
    pub fn compact(&self) -> Self {
        let keep: Vec<usize> = (0..self.num_generators()).filter(|&h| self.scales[h] > 0.0 && self.templates.column(h).iter().any(|v| *v != 0.0)).collect();
        Self { center: self.center.clone(), templates: self.templates.select_columns(&keep), scales: self.scales.select_rows(&keep) }
    }

    /// Membership with tolerance. Halfspace test in up to 3 dimensions when
    /// the generators span the space, otherwise a feasibility LP in `β`.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let n = self.dim();
        let z = self.compact();
        if n <= 3 && z.generators().rank(1e-12) == n {
            if let Ok(p) = halfspace_rep(&z) {
                return p.contains(x, tol);
            }
        }
        self.contains_point_lp(x, tol)
    }

    /// Membership via the feasibility LP `G β = x − c`, `β ∈ [−1, 1]^p`.
    pub fn contains_point_lp(&self, x: &DVector<f64>, tol: f64) -> bool {
        let z = self.compact();
        let g = z.generators();
        let p = g.ncols();
        let diff = x - &z.center;
        if p == 0 {
            return diff.amax() <= tol;
        }
        let n = self.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            let a: Vec<f64> = g.row(i).iter().copied().collect();
            rows.push((a.clone(), diff[i] + tol));
            rows.push((a.iter().map(|v| -v).collect(), -diff[i] + tol));
        }
        let lp = match optim::LinearProgram::from_rows(DVector::zeros(p), &rows) {
            Ok(lp) => lp.with_bounds(DVector::from_element(p, -1.0), DVector::from_element(p, 1.0)),
            Err(_) => return false,
        };
        optim::solve_lp(&lp).is_ok()
    }
}

#[derive(Serialize, Deserialize)]
struct ZonotopeJson {
    center: Vec<f64>,
    /// One inner array per generator column.
    generators: Vec<Vec<f64>>,
}

impl From<Zonotope> for ZonotopeJson {
    fn from(z: Zonotope) -> Self {
        Self { center: matrix_io::to_vec(&z.center), generators: matrix_io::to_columns(&z.generators()) }
    }
}

impl TryFrom<ZonotopeJson> for Zonotope {
    type Error = SetError;

    fn try_from(j: ZonotopeJson) -> Result<Self, SetError> {
        let n = j.center.len();
        let g = matrix_io::from_columns(&j.generators, n).map_err(SetError::Invalid)?;
        Zonotope::from_generators(DVector::from_vec(j.center), g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    fn unit_box() -> Zonotope {
        Zonotope::from_generators(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn sum_concatenates_generators() {
        let a = Zonotope::from_generators(dvector![1.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let b = Zonotope::from_generators(dvector![0.0, 1.0], dmatrix![1.0; 1.0]).unwrap();
        let s = a.minkowski_sum(&b).unwrap();
        assert_eq!(s.center(), &dvector![1.0, 1.0]);
        assert_eq!(s.generators(), dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 1.0]);
        assert_eq!(a.minkowski_sum(&Zonotope::origin(2)).unwrap().generators(), a.generators());
        assert!(a.minkowski_sum(&Zonotope::origin(3)).is_err());
    }

    #[test]
    fn linear_map_keeps_scales() {
        let z = unit_box().linear_map(&(2.0 * DMatrix::identity(2, 2))).unwrap();
        assert_eq!(z.templates(), &(2.0 * DMatrix::<f64>::identity(2, 2)));
        assert_eq!(z.scales(), &dvector![1.0, 1.0]);
        let zero = unit_box().linear_map(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(zero.znorm(), 0.0);
        let line = unit_box().linear_map(&dmatrix![1.0, 1.0]).unwrap();
        assert_eq!(line.half_widths(), dvector![2.0]);
    }

    #[test]
    fn hull_and_norm_by_hand() {
        let z = Zonotope::from_generators(dvector![1.0, -1.0], dmatrix![1.0, 2.0; 0.0, 1.0]).unwrap();
        let h = z.interval_hull();
        assert_eq!(h.lower(), &dvector![-2.0, -2.0]);
        assert_eq!(h.upper(), &dvector![4.0, 0.0]);
        assert_eq!(z.znorm(), 4.0);
        assert_eq!(unit_box().znorm(), 2.0);
        let p = Zonotope::point(dvector![3.0]);
        assert_eq!(p.interval_hull().lower(), p.interval_hull().upper());
    }

    #[test]
    fn scales_must_be_non_negative() {
        assert!(Zonotope::new(dvector![0.0], dmatrix![1.0], dvector![-1.0]).is_err());
        assert!(Zonotope::new(dvector![0.0], dmatrix![1.0, 1.0], dvector![1.0]).is_err());
    }

    #[test]
    fn membership_examples() {
        assert!(unit_box().contains_point(&dvector![0.5, -0.5], 1e-9));
        assert!(!unit_box().contains_point(&dvector![1.1, 0.0], 1e-9));
        assert!(unit_box().contains_point_lp(&dvector![1.0, 1.0], 1e-9));
        assert!(!unit_box().contains_point_lp(&dvector![1.1, 0.0], 1e-9));
    }

    #[test]
    fn degenerate_membership_uses_lp() {
        // A segment in the plane: halfspace facets alone would not pin the flat direction.
        let seg = Zonotope::from_generators(dvector![0.0, 0.0], dmatrix![1.0; 1.0]).unwrap();
        assert!(seg.contains_point(&dvector![0.5, 0.5], 1e-9));
        assert!(!seg.contains_point(&dvector![0.5, -0.5], 1e-9));
    }

    #[test]
    fn json_exports_effective_generators() {
        let z = Zonotope::new(dvector![1.0, 2.0], DMatrix::identity(2, 2), dvector![0.5, 2.0]).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"center":[1.0,2.0],"generators":[[0.5,0.0],[0.0,2.0]]}"#);
        let back: Zonotope = serde_json::from_str(&s).unwrap();
        assert_eq!(back.generators(), z.generators());
        assert_eq!(back.center(), z.center());
    }

    #[test]
    fn cartesian_product_is_block_diagonal() {
        let a = Zonotope::centered_box(dvector![1.0], &[0.5]).unwrap();
        let b = unit_box();
        let p = a.cartesian_product(&b);
        assert_eq!(p.dim(), 3);
        assert_eq!(p.half_widths(), dvector![0.5, 1.0, 1.0]);
        assert_eq!(p.generators(), dmatrix![0.5, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 1.0]);
    }
}
