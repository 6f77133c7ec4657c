use nalgebra::{DMatrix, DVector};

use crate::{LtiSystem, SysError};

/// Disturbance-free output `y*[k]` for inputs given as columns of `u`,
/// computed by forward recursion.
pub fn nominal_output<U>(sys: &LtiSystem, x0: &DVector<f64>, u: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::Dyn, U>) -> Result<DMatrix<f64>, SysError>
where
    U: nalgebra::storage::Storage<f64, nalgebra::Dyn, nalgebra::Dyn>,
{
    sys.require_discrete()?;
    check_trace(sys, x0, u.nrows())?;
    let steps = u.ncols();
    let mut y = DMatrix::zeros(sys.outputs(), steps);
    let mut x = x0.clone();
    for k in 0..steps {
        let uk = u.column(k);
        let mut yk = y.column_mut(k);
        yk.gemv(1.0, sys.c(), &x, 0.0);
        yk.gemv(1.0, sys.d(), &uk, 1.0);
        if k + 1 < steps {
            let mut next = sys.a() * &x;
            next.gemv(1.0, sys.b(), &uk, 1.0);
            x = next;
        }
    }
    Ok(y)
}

/// Simulates with explicit noise sequences (columns per step).
/// Returns the outputs and the state trajectory (`steps + 1` columns).
pub fn simulate(sys: &LtiSystem, x0: &DVector<f64>, u: &DMatrix<f64>, w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), SysError> {
    sys.require_discrete()?;
    check_trace(sys, x0, u.nrows())?;
    let steps = u.ncols();
    if w.shape() != (sys.disturbance_dim(), steps) || v.shape() != (sys.error_dim(), steps) {
        return Err(SysError::Invalid("noise sequences must match the system and input length".into()));
    }
    let mut y = DMatrix::zeros(sys.outputs(), steps);
    let mut xs = DMatrix::zeros(sys.order(), steps + 1);
    xs.set_column(0, x0);
    for k in 0..steps {
        let x = xs.column(k).into_owned();
        let yk = sys.c() * &x + sys.d() * u.column(k) + sys.f() * v.column(k);
        y.set_column(k, &yk);
        let next = sys.a() * &x + sys.b() * u.column(k) + sys.e() * w.column(k) + sys.ev() * v.column(k);
        xs.set_column(k + 1, &next);
    }
    Ok((y, xs))
}

fn check_trace(sys: &LtiSystem, x0: &DVector<f64>, input_rows: usize) -> Result<(), SysError> {
    if x0.len() != sys.order() {
        return Err(SysError::Invalid(format!("initial state has {} entries, system order is {}", x0.len(), sys.order())));
    }
    if input_rows != sys.inputs() {
        return Err(SysError::Invalid(format!("input trace has {input_rows} rows, system has {} inputs", sys.inputs())));
    }
    Ok(())
}

/// Maps of the combined noise `h = (w, v)` into the output deviation.
#[derive(Debug, Clone)]
pub struct DisturbanceMaps {
    /// `Ē_i = C Ãⁱ [E, Ev]` for `i < k`.
    pub state_maps: Vec<DMatrix<f64>>,
    /// `[0, F]`.
    pub output_map: DMatrix<f64>,
}

impl DisturbanceMaps {
    /// `J_k = [Ē_0, …, Ē_{k−1}, [0, F]]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let q = self.output_map.nrows();
        let h = self.output_map.ncols();
        let k = self.state_maps.len();
        let mut j = DMatrix::zeros(q, h * (k + 1));
        for (i, e) in self.state_maps.iter().enumerate() {
            j.columns_mut(i * h, h).copy_from(e);
        }
        j.columns_mut(k * h, h).copy_from(&self.output_map);
        j
    }
}

/// `Ē_0 … Ē_{k−1}` by repeated multiplication with `Ã`, plus the output map.
pub fn disturbance_maps(sys: &LtiSystem, k: usize) -> Result<DisturbanceMaps, SysError> {
    sys.require_discrete()?;
    let mut state_maps = Vec::with_capacity(k);
    let mut propagated = sys.noise_to_state();
    for _ in 0..k {
        state_maps.push(sys.c() * &propagated);
        propagated = sys.a() * propagated;
    }
    Ok(DisturbanceMaps { state_maps, output_map: sys.noise_to_output() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{discretize, Timing};
    use nalgebra::dmatrix;
    use setlib::Zonotope;

    #[test]
    fn zero_input_zero_state_gives_zero_output() {
        let sys = LtiSystem::new(dmatrix![0.9], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(1.0)).unwrap();
        let y = nominal_output(&sys, &DVector::zeros(1), &DMatrix::zeros(1, 10)).unwrap();
        assert_eq!(y.amax(), 0.0);
    }

    #[test]
    fn one_step_of_double_integrator() {
        let c = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0], DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Continuous).unwrap();
        let d = discretize(&c, 0.004).unwrap();
        let y = nominal_output(&d, &DVector::zeros(2), &DMatrix::from_element(1, 3, 1.0)).unwrap();
        assert!((y.column(1) - dmatrix![8e-6; 0.004]).amax() < 1e-15);
    }

    #[test]
    fn maps_of_identity_system() {
        let w = Zonotope::centered_box(DVector::zeros(2), &[1.0, 1.0]).unwrap();
        let sys = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(DMatrix::identity(2, 2), w)
            .unwrap();
        let maps = disturbance_maps(&sys, 4).unwrap();
        assert!(maps.state_maps.iter().all(|e| e == &DMatrix::<f64>::identity(2, 2)));
        let j0 = disturbance_maps(&sys, 0).unwrap().stacked();
        assert_eq!(j0, sys.noise_to_output());
    }

    #[test]
    fn rank_deficient_example() {
        // Two outputs, one disturbance along the first state, no output error.
        let w = Zonotope::centered_box(DVector::zeros(1), &[1.0]).unwrap();
        let v = Zonotope::centered_box(DVector::zeros(1), &[1.0]).unwrap();
        let sys = LtiSystem::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(dmatrix![1.0; 0.0], w)
            .unwrap()
            .with_measurement_error(DMatrix::zeros(2, 1), v)
            .unwrap();
        let j1 = disturbance_maps(&sys, 1).unwrap().stacked();
        assert_eq!(j1.rank(1e-12), 1);
    }
}
