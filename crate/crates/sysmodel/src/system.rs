use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setlib::Zonotope;

use crate::SysError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    Continuous,
    /// Sample time in seconds.
    Discrete(f64),
}

impl Timing {
    pub fn sample_time(&self) -> Option<f64> {
        match self {
            Timing::Continuous => None,
            Timing::Discrete(dt) => Some(*dt),
        }
    }

    pub(crate) fn compatible(&self, other: &Timing) -> bool {
        match (self, other) {
            (Timing::Continuous, Timing::Continuous) => true,
            (Timing::Discrete(a), Timing::Discrete(b)) => (a - b).abs() <= 1e-12 * a.abs().max(b.abs()),
            _ => false,
        }
    }
}

/// Which matrix of an [`LtiSystem`] an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixId {
    A,
    B,
    C,
    D,
    E,
    F,
    Ev,
    /// Template generators of W.
    Gw,
    /// Template generators of V.
    Gv,
}

/// Uncertain LTI system
///
/// ```text
/// x⁺ (or ẋ) = A x + B u + E w + Ev v,   w ∈ W
/// y         = C x + D u + F v,          v ∈ V
/// ```
///
/// `Ev` carries measurement error of an upstream block into downstream
/// states after composition; it is zero for primitive blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    e: DMatrix<f64>,
    f: DMatrix<f64>,
    ev: DMatrix<f64>,
    w: Zonotope,
    v: Zonotope,
    timing: Timing,
}

fn expect_shape(name: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<(), SysError> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(SysError::Shape { name, expected: (rows, cols), found: (m.nrows(), m.ncols()) })
    }
}

impl LtiSystem {
    /// Noise-free system.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>, timing: Timing) -> Result<Self, SysError> {
        let n = a.nrows();
        let (m, q) = (b.ncols(), c.nrows());
        let sys = Self {
            e: DMatrix::zeros(n, 0),
            f: DMatrix::zeros(q, 0),
            ev: DMatrix::zeros(n, 0),
            w: Zonotope::origin(0),
            v: Zonotope::origin(0),
            a,
            b,
            c,
            d,
            timing,
        };
        expect_shape("A", &sys.a, n, n)?;
        expect_shape("B", &sys.b, n, m)?;
        expect_shape("C", &sys.c, q, n)?;
        expect_shape("D", &sys.d, q, m)?;
        if let Timing::Discrete(dt) = timing {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(SysError::Invalid(format!("sample time must be positive, got {dt}")));
            }
        }
        Ok(sys)
    }

    /// Memoryless `y = D u`.
    pub fn static_gain(d: DMatrix<f64>, timing: Timing) -> Result<Self, SysError> {
        let (q, m) = d.shape();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(q, 0), d, timing)
    }

    /// Attaches process disturbance `w ∈ W` entering the state through `E`.
    pub fn with_disturbance(mut self, e: DMatrix<f64>, w: Zonotope) -> Result<Self, SysError> {
        expect_shape("E", &e, self.order(), w.dim())?;
        self.e = e;
        self.w = w;
        Ok(self)
    }

    /// Attaches measurement error `v ∈ V` entering the output through `F`.
    /// Any previous `Ev` is reset to zero.
    pub fn with_measurement_error(mut self, f: DMatrix<f64>, v: Zonotope) -> Result<Self, SysError> {
        expect_shape("F", &f, self.outputs(), v.dim())?;
        self.ev = DMatrix::zeros(self.order(), v.dim());
        self.f = f;
        self.v = v;
        Ok(self)
    }

    /// Sets the map of measurement error into the state.
    pub fn with_error_to_state(mut self, ev: DMatrix<f64>) -> Result<Self, SysError> {
        expect_shape("Ev", &ev, self.order(), self.v.dim())?;
        self.ev = ev;
        Ok(self)
    }

    /// Replaces `W`, keeping `E`.
    pub fn with_w(mut self, w: Zonotope) -> Result<Self, SysError> {
        if w.dim() != self.w.dim() {
            return Err(SysError::Invalid(format!("W must be {}-dimensional", self.w.dim())));
        }
        self.w = w;
        Ok(self)
    }

    /// Replaces `V`, keeping `F` and `Ev`.
    pub fn with_v(mut self, v: Zonotope) -> Result<Self, SysError> {
        if v.dim() != self.v.dim() {
            return Err(SysError::Invalid(format!("V must be {}-dimensional", self.v.dim())));
        }
        self.v = v;
        Ok(self)
    }

    /// Overwrites one matrix entry (template generators of W/V included).
    pub fn with_entry(mut self, which: MatrixId, row: usize, col: usize, value: f64) -> Result<Self, SysError> {
        let target = match which {
            MatrixId::A => &mut self.a,
            MatrixId::B => &mut self.b,
            MatrixId::C => &mut self.c,
            MatrixId::D => &mut self.d,
            MatrixId::E => &mut self.e,
            MatrixId::F => &mut self.f,
            MatrixId::Ev => &mut self.ev,
            MatrixId::Gw | MatrixId::Gv => {
                let z = if which == MatrixId::Gw { &self.w } else { &self.v };
                let mut t = z.templates().clone();
                if row >= t.nrows() || col >= t.ncols() {
                    return Err(SysError::Invalid(format!("{which:?} entry ({row}, {col}) out of range")));
                }
                t[(row, col)] = value;
                let z = Zonotope::new(z.center().clone(), t, z.scales().clone())?;
                if which == MatrixId::Gw {
                    self.w = z
                } else {
                    self.v = z
                }
                return Ok(self);
            }
        };
        if row >= target.nrows() || col >= target.ncols() {
            return Err(SysError::Invalid(format!("{which:?} entry ({row}, {col}) out of range")));
        }
        target[(row, col)] = value;
        Ok(self)
    }

    pub fn entry(&self, which: MatrixId, row: usize, col: usize) -> Option<f64> {
        let m = match which {
            MatrixId::A => &self.a,
            MatrixId::B => &self.b,
            MatrixId::C => &self.c,
            MatrixId::D => &self.d,
            MatrixId::E => &self.e,
            MatrixId::F => &self.f,
            MatrixId::Ev => &self.ev,
            MatrixId::Gw => self.w.templates(),
            MatrixId::Gv => self.v.templates(),
        };
        m.get((row, col)).copied()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }
    pub fn ev(&self) -> &DMatrix<f64> {
        &self.ev
    }
    pub fn w(&self) -> &Zonotope {
        &self.w
    }
    pub fn v(&self) -> &Zonotope {
        &self.v
    }
    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn disturbance_dim(&self) -> usize {
        self.w.dim()
    }
    pub fn error_dim(&self) -> usize {
        self.v.dim()
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.timing, Timing::Discrete(_))
    }

    pub(crate) fn require_discrete(&self) -> Result<f64, SysError> {
        self.timing.sample_time().ok_or(SysError::NotDiscrete)
    }

    /// Combined noise `h = (w, v)` mapped into the state: `[E, Ev]`.
    pub fn noise_to_state(&self) -> DMatrix<f64> {
        let n = self.order();
        let (nw, nv) = (self.disturbance_dim(), self.error_dim());
        let mut m = DMatrix::zeros(n, nw + nv);
        m.columns_mut(0, nw).copy_from(&self.e);
        m.columns_mut(nw, nv).copy_from(&self.ev);
        m
    }

    /// Combined noise mapped into the output: `[0, F]`.
    pub fn noise_to_output(&self) -> DMatrix<f64> {
        let (nw, nv) = (self.disturbance_dim(), self.error_dim());
        let mut m = DMatrix::zeros(self.outputs(), nw + nv);
        m.columns_mut(nw, nv).copy_from(&self.f);
        m
    }

    /// `W × V`.
    pub fn noise_set(&self) -> Zonotope {
        self.w.cartesian_product(&self.v)
    }

    /// Spectral radius of `A` (magnitude of the largest eigenvalue).
    pub fn spectral_radius(&self) -> f64 {
        if self.order() == 0 {
            return 0.0;
        }
        self.a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    /// Exports `C x + D u` at one instant.
    pub fn output_at(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }
}
