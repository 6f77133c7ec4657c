use nalgebra::DMatrix;

use crate::{LtiSystem, SysError, Timing};

/// Exact zero-order-hold discretization.
///
/// One exponential of `[[A, B, E, Ev], [0, 0, 0, 0]]·dt` yields `Ã` and the
/// input integrals for every held channel; `C`, `D`, `F`, `W`, `V` are kept.
pub fn discretize(sys: &LtiSystem, dt: f64) -> Result<LtiSystem, SysError> {
    if sys.is_discrete() {
        return Err(SysError::AlreadyDiscrete);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SysError::Invalid(format!("sample time must be positive, got {dt}")));
    }
    let n = sys.order();
    let (m, nw, nv) = (sys.inputs(), sys.disturbance_dim(), sys.error_dim());
    let total = n + m + nw + nv;
    let mut aug = DMatrix::zeros(total, total);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * dt));
    aug.view_mut((0, n + m), (n, nw)).copy_from(&(sys.e() * dt));
    aug.view_mut((0, n + m + nw), (n, nv)).copy_from(&(sys.ev() * dt));
    let phi = if total == 0 { aug } else { aug.exp() };

    let block = |col: usize, width: usize| phi.view((0, col), (n, width)).into_owned();
    LtiSystem::new(block(0, n), block(n, m), sys.c().clone(), sys.d().clone(), Timing::Discrete(dt))?
        .with_disturbance(block(n + m, nw), sys.w().clone())?
        .with_measurement_error(sys.f().clone(), sys.v().clone())?
        .with_error_to_state(block(n + m + nw, nv))
}

/// Bilinear (trapezoidal) discretization of a noise-free block.
///
/// The discrete state is the continuous state minus the feedthrough share of
/// the current input, `x[k] = w[k] + M B dt/2 u[k]` with `M = (I − A dt/2)⁻¹`:
///
/// ```text
/// w⁺ = Ad w + (Ad + I) M B dt/2 u,   Ad = M (I + A dt/2)
/// y  = C w + (D + C M B dt/2) u
/// ```
///
/// Noise channels would leak process disturbance into the output, which the
/// system form cannot express, so blocks with `W` or `V` are rejected.
pub fn discretize_bilinear(sys: &LtiSystem, dt: f64) -> Result<LtiSystem, SysError> {
    if sys.is_discrete() {
        return Err(SysError::AlreadyDiscrete);
    }
    if sys.disturbance_dim() > 0 || sys.error_dim() > 0 {
        return Err(SysError::Invalid("bilinear discretization is only defined for noise-free blocks".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SysError::Invalid(format!("sample time must be positive, got {dt}")));
    }
    let n = sys.order();
    let eye = DMatrix::<f64>::identity(n, n);
    let half = sys.a() * (dt / 2.0);
    let m = (&eye - &half).try_inverse().ok_or_else(|| SysError::Invalid("I − A·dt/2 is singular".into()))?;
    let ad = &m * (&eye + &half);
    let mb = &m * sys.b() * (dt / 2.0);
    let bd = (&ad + &eye) * &mb;
    let dd = sys.d() + sys.c() * &mb;
    LtiSystem::new(ad, bd, sys.c().clone(), dd, Timing::Discrete(dt))
}
