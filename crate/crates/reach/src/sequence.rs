use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use setlib::{Interval, Zonotope};
use sysmodel::LtiSystem;

use crate::ReachError;

/// Time-indexed sets `R[0..=k_end]`, all of one dimension.
#[derive(Debug, Clone, Serialize)]
pub struct ReachSequence {
    pub sets: Vec<Zonotope>,
    pub sample_time: f64,
    pub converged_at: Option<usize>,
}

impl ReachSequence {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sets.first().map_or(0, Zonotope::dim)
    }

    pub fn interval_hulls(&self) -> Vec<Interval> {
        self.sets.iter().map(Zonotope::interval_hull).collect()
    }

    /// CSV with one row per step and dimension: `k,dim,lower,upper`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ReachError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "dim", "lower", "upper"])?;
        for (k, hull) in self.interval_hulls().iter().enumerate() {
            for i in 0..hull.dim() {
                w.write_record(&[k.to_string(), i.to_string(), format!("{:?}", hull.lower()[i]), format!("{:?}", hull.upper()[i])])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_step(sys: &LtiSystem, x: &Zonotope, u: &DVector<f64>) -> Result<(), ReachError> {
    if !sys.is_discrete() {
        return Err(sysmodel::SysError::NotDiscrete.into());
    }
    if x.dim() != sys.order() || u.len() != sys.inputs() {
        return Err(ReachError::Invalid(format!(
            "state set has dimension {} and input {}, system expects {} and {}",
            x.dim(),
            u.len(),
            sys.order(),
            sys.inputs()
        )));
    }
    Ok(())
}

/// One step of the set recursion. Returns the successor state set
/// `A X ⊕ B u ⊕ [E, Ev](W × V)` and the output set `C X ⊕ D u ⊕ F V` at the
/// current step.
pub fn reach_step(sys: &LtiSystem, x: &Zonotope, u: &DVector<f64>) -> Result<(Zonotope, Zonotope), ReachError> {
    check_step(sys, x, u)?;
    let noise = sys.noise_set();
    let next = x.linear_map(sys.a())?.translate(&(sys.b() * u))?.minkowski_sum(&noise.linear_map(&sys.noise_to_state())?)?;
    let output = x.linear_map(sys.c())?.translate(&(sys.d() * u))?.minkowski_sum(&sys.v().linear_map(sys.f())?)?;
    Ok((next, output))
}

/// Output sets `R[0..=k_end]` from the initial set `x0` under the inputs in
/// the first `k_end + 1` columns of `u`. Exact in discrete time: every step
/// adds a fresh copy of the noise set.
pub fn reach_horizon(sys: &LtiSystem, x0: &Zonotope, u: &DMatrix<f64>, k_end: usize) -> Result<ReachSequence, ReachError> {
    let dt = sys.timing().sample_time().ok_or(sysmodel::SysError::NotDiscrete)?;
    if u.ncols() <= k_end {
        return Err(ReachError::Invalid(format!("need {} input samples, got {}", k_end + 1, u.ncols())));
    }
    let mut sets = Vec::with_capacity(k_end + 1);
    let mut x = x0.clone();
    for k in 0..=k_end {
        let (next, out) = reach_step(sys, &x, &u.column(k).into_owned())?;
        sets.push(out);
        x = next;
    }
    Ok(ReachSequence { sets, sample_time: dt, converged_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use sysmodel::Timing;

    fn scalar(a: f64, w: f64) -> LtiSystem {
        LtiSystem::new(dmatrix![a], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(dmatrix![1.0], Zonotope::centered_box(DVector::zeros(1), &[w]).unwrap())
            .unwrap()
    }

    #[test]
    fn half_decay_by_hand() {
        let sys = scalar(0.5, 1.0);
        let seq = reach_horizon(&sys, &Zonotope::origin(1), &DMatrix::zeros(1, 3), 2).unwrap();
        let hw: Vec<f64> = seq.sets.iter().map(|z| z.half_widths()[0]).collect();
        assert_eq!(hw, vec![0.0, 1.0, 1.5]);
    }

    #[test]
    fn noise_free_point_follows_nominal_state() {
        let sys =
            LtiSystem::new(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![0.0; 1.0], DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Discrete(1.0)).unwrap();
        let x = Zonotope::point(DVector::from_vec(vec![1.0, 2.0]));
        let (next, out) = reach_step(&sys, &x, &DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(next.center(), &DVector::from_vec(vec![3.0, 5.0]));
        assert_eq!(next.znorm(), 0.0);
        assert_eq!(out.center(), x.center());
    }

    #[test]
    fn generators_grow_one_per_step() {
        let w = Zonotope::centered_box(DVector::zeros(1), &[1.0]).unwrap();
        let sys = LtiSystem::new(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![0.0; 1.0], DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(dmatrix![0.0; 1.0], w)
            .unwrap();
        let mut x = Zonotope::origin(2);
        for k in 1..=3 {
            x = reach_step(&sys, &x, &DVector::zeros(1)).unwrap().0;
            assert_eq!(x.num_generators(), k);
        }
    }

    #[test]
    fn csv_rows_per_dimension() {
        let seq = reach_horizon(&scalar(0.5, 1.0), &Zonotope::origin(1), &DMatrix::zeros(1, 2), 1).unwrap();
        let mut buf = Vec::new();
        seq.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,dim,lower,upper\n0,0,0.0,0.0\n1,0,-1.0,1.0\n");
    }
}
