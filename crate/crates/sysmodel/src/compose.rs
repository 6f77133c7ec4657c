use nalgebra::DMatrix;

use crate::{LtiSystem, SysError};

/// Copies `src` into `dst` at `(row, col)`.
fn put(dst: &mut DMatrix<f64>, row: usize, col: usize, src: &DMatrix<f64>) {
    dst.view_mut((row, col), src.shape()).copy_from(src);
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    put(&mut m, 0, 0, a);
    put(&mut m, a.nrows(), a.ncols(), b);
    m
}

/// `s1` feeding `s2`: input of `s1`, output of `s2`, state `[x1; x2]`.
///
/// Noise channels concatenate (`W = W1 × W2`, `V = V1 × V2`); the
/// measurement error of `s1` reaches the state of `s2` through `B2` and the
/// output through `D2`, as its own channel rather than a copy.
pub fn series(s1: &LtiSystem, s2: &LtiSystem) -> Result<LtiSystem, SysError> {
    if !s1.timing().compatible(&s2.timing()) {
        return Err(SysError::TimingMismatch);
    }
    if s1.outputs() != s2.inputs() {
        return Err(SysError::Invalid(format!("series: first block has {} outputs, second expects {} inputs", s1.outputs(), s2.inputs())));
    }
    let (n1, n2) = (s1.order(), s2.order());
    let (nv1, nv2) = (s1.error_dim(), s2.error_dim());

    let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
    put(&mut a, 0, 0, s1.a());
    put(&mut a, n1, 0, &(s2.b() * s1.c()));
    put(&mut a, n1, n1, s2.a());

    let mut b = DMatrix::zeros(n1 + n2, s1.inputs());
    put(&mut b, 0, 0, s1.b());
    put(&mut b, n1, 0, &(s2.b() * s1.d()));

    let mut c = DMatrix::zeros(s2.outputs(), n1 + n2);
    put(&mut c, 0, 0, &(s2.d() * s1.c()));
    put(&mut c, 0, n1, s2.c());

    let d = s2.d() * s1.d();
    let e = block_diag(s1.e(), s2.e());

    let mut ev = DMatrix::zeros(n1 + n2, nv1 + nv2);
    put(&mut ev, 0, 0, s1.ev());
    put(&mut ev, n1, 0, &(s2.b() * s1.f()));
    put(&mut ev, n1, nv1, s2.ev());

    let mut f = DMatrix::zeros(s2.outputs(), nv1 + nv2);
    put(&mut f, 0, 0, &(s2.d() * s1.f()));
    put(&mut f, 0, nv1, s2.f());

    LtiSystem::new(a, b, c, d, s1.timing())?
        .with_disturbance(e, s1.w().cartesian_product(s2.w()))?
        .with_measurement_error(f, s1.v().cartesian_product(s2.v()))?
        .with_error_to_state(ev)
}

/// Positive feedback loop `u1 = r + y2`, `u2 = y1`; output `y1`.
pub fn feedback(s1: &LtiSystem, s2: &LtiSystem) -> Result<LtiSystem, SysError> {
    let full = feedback_full(s1, s2)?;
    let q1 = s1.outputs();
    let keep: Vec<usize> = (0..q1).collect();
    let c = full.c().select_rows(&keep);
    let d = full.d().select_rows(&keep);
    let f = full.f().select_rows(&keep);
    LtiSystem::new(full.a().clone(), full.b().clone(), c, d, full.timing())?
        .with_disturbance(full.e().clone(), full.w().clone())?
        .with_measurement_error(f, full.v().clone())?
        .with_error_to_state(full.ev().clone())
}

/// Like [`feedback`] but exposes both loop signals as output `[y1; y2]`.
pub fn feedback_full(s1: &LtiSystem, s2: &LtiSystem) -> Result<LtiSystem, SysError> {
    if !s1.timing().compatible(&s2.timing()) {
        return Err(SysError::TimingMismatch);
    }
    if s1.outputs() != s2.inputs() || s2.outputs() != s1.inputs() {
        return Err(SysError::Invalid(format!("feedback: blocks are {}→{} and {}→{}", s1.inputs(), s1.outputs(), s2.inputs(), s2.outputs())));
    }
    let (n1, n2) = (s1.order(), s2.order());
    let (m, q1, q2) = (s1.inputs(), s1.outputs(), s2.outputs());
    let (nv1, nv2) = (s1.error_dim(), s2.error_dim());

    // Signals as linear maps of z = [x1; x2; r; v1; v2].
    let nz = n1 + n2 + m + nv1 + nv2;
    let (ox1, ox2, or, ov1, ov2) = (0, n1, n1 + n2, n1 + n2 + m, n1 + n2 + m + nv1);

    let loop_gain = DMatrix::identity(q1, q1) - s1.d() * s2.d();
    let lu = loop_gain.clone().lu();
    let scale = loop_gain.amax().max(1.0);
    let min_pivot = (0..q1).map(|i| lu.u()[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if q1 > 0 && min_pivot <= 1e-12 * scale {
        return Err(SysError::AlgebraicLoop);
    }
    let s = lu.try_inverse().ok_or(SysError::AlgebraicLoop)?;

    let mut y1_raw = DMatrix::zeros(q1, nz);
    put(&mut y1_raw, 0, ox1, s1.c());
    put(&mut y1_raw, 0, ox2, &(s1.d() * s2.c()));
    put(&mut y1_raw, 0, or, s1.d());
    put(&mut y1_raw, 0, ov1, s1.f());
    put(&mut y1_raw, 0, ov2, &(s1.d() * s2.f()));
    let y1 = &s * y1_raw;

    let mut y2 = s2.d() * &y1;
    {
        let mut own = DMatrix::zeros(q2, nz);
        put(&mut own, 0, ox2, s2.c());
        put(&mut own, 0, ov2, s2.f());
        y2 += own;
    }

    let mut u1 = y2.clone();
    for i in 0..m {
        u1[(i, or + i)] += 1.0;
    }

    let mut x1n = s1.b() * &u1;
    {
        let mut own = DMatrix::zeros(n1, nz);
        put(&mut own, 0, ox1, s1.a());
        put(&mut own, 0, ov1, s1.ev());
        x1n += own;
    }
    let mut x2n = s2.b() * &y1;
    {
        let mut own = DMatrix::zeros(n2, nz);
        put(&mut own, 0, ox2, s2.a());
        put(&mut own, 0, ov2, s2.ev());
        x2n += own;
    }

    let mut next = DMatrix::zeros(n1 + n2, nz);
    put(&mut next, 0, 0, &x1n);
    put(&mut next, n1, 0, &x2n);
    let mut out = DMatrix::zeros(q1 + q2, nz);
    put(&mut out, 0, 0, &y1);
    put(&mut out, q1, 0, &y2);

    let cols = |m: &DMatrix<f64>, start: usize, width: usize| m.columns(start, width).into_owned();
    LtiSystem::new(cols(&next, ox1, n1 + n2), cols(&next, or, m), cols(&out, ox1, n1 + n2), cols(&out, or, m), s1.timing())?
        .with_disturbance(block_diag(s1.e(), s2.e()), s1.w().cartesian_product(s2.w()))?
        .with_measurement_error(cols(&out, ov1, nv1 + nv2), s1.v().cartesian_product(s2.v()))?
        .with_error_to_state(cols(&next, ov1, nv1 + nv2))
}
