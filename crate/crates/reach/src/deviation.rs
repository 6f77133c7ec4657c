use nalgebra::{DMatrix, DVector};
use setlib::Zonotope;
use sysmodel::{disturbance_maps, LtiSystem};

use crate::ReachError;

/// Deviation of the output from its noise-free trajectory at step `k`.
///
/// Templates are `[Ē_0 T, …, Ē_{k−1} T, [0, F] T]` with `T` the block
/// templates of `W × V`; every block carries the noise scales unchanged, so
/// the result is linear in the noise centers and scales. Independent of the
/// inputs and of the initial state.
pub fn deviation_reach(sys: &LtiSystem, k: usize) -> Result<Zonotope, ReachError> {
    Ok(deviation_tube(sys, k)?.pop().expect("tube holds k + 1 sets"))
}

/// `deviation_reach` for every `k in 0..=k_end`, sharing the map powers.
pub fn deviation_tube(sys: &LtiSystem, k_end: usize) -> Result<Vec<Zonotope>, ReachError> {
    let maps = disturbance_maps(sys, k_end)?;
    let noise = sys.noise_set();
    let (t, alpha, c) = (noise.templates(), noise.scales(), noise.center());
    let q = sys.outputs();
    let gh = t.ncols();

    let out_block = &maps.output_map * t;
    let out_center = &maps.output_map * c;
    let mut center_map = DMatrix::<f64>::zeros(q, c.len());
    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(k_end);
    let mut tube = Vec::with_capacity(k_end + 1);
    for k in 0..=k_end {
        if k > 0 {
            let e = &maps.state_maps[k - 1];
            center_map += e;
            blocks.push(e * t);
        }
        let mut templates = DMatrix::zeros(q, gh * (k + 1));
        for (i, b) in blocks.iter().enumerate() {
            templates.columns_mut(i * gh, gh).copy_from(b);
        }
        templates.columns_mut(k * gh, gh).copy_from(&out_block);
        let scales = DVector::from_iterator(gh * (k + 1), (0..=k).flat_map(|_| alpha.iter().copied()));
        let center = &center_map * c + &out_center;
        tube.push(Zonotope::new(center, templates, scales)?);
    }
    Ok(tube)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use sysmodel::Timing;

    #[test]
    fn scalar_one_step_interval() {
        let w = Zonotope::centered_box(DVector::zeros(1), &[0.1]).unwrap();
        let v = Zonotope::centered_box(DVector::zeros(1), &[0.01]).unwrap();
        let sys = LtiSystem::new(dmatrix![0.3], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(dmatrix![1.0], w)
            .unwrap()
            .with_measurement_error(dmatrix![1.0], v)
            .unwrap();
        let r0 = deviation_reach(&sys, 0).unwrap();
        assert!((r0.half_widths()[0] - 0.01).abs() < 1e-15);
        let r1 = deviation_reach(&sys, 1).unwrap();
        let hull = r1.interval_hull();
        assert!((hull.lower()[0] + 0.11).abs() < 1e-15 && (hull.upper()[0] - 0.11).abs() < 1e-15);
    }
}
