use nalgebra::DMatrix;
use sysmodel::{feedback, series, LtiSystem};

use crate::{SynthError, Wiring};

fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let mut m = DMatrix::zeros(blocks.iter().map(|b| b.nrows()).sum(), cols);
    let mut at = 0;
    for b in blocks {
        m.view_mut((at, 0), b.shape()).copy_from(b);
        at += b.nrows();
    }
    m
}

fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let mut m = DMatrix::zeros(rows, blocks.iter().map(|b| b.ncols()).sum());
    let mut at = 0;
    for b in blocks {
        m.view_mut((0, at), b.shape()).copy_from(b);
        at += b.ncols();
    }
    m
}

/// Plant with inputs `[r1; r2]`, `u_p = r1 + actuate · r2`, and outputs `[y_p; x_p; u_p; r2]`.
fn widen_plant(plant: &LtiSystem, actuate: &DMatrix<f64>) -> Result<LtiSystem, SynthError> {
    let (n, m, q) = (plant.order(), plant.inputs(), plant.outputs());
    let nyc = actuate.ncols();
    let b = hstack(&[plant.b(), &(plant.b() * actuate)]);
    let c = vstack(&[plant.c(), &DMatrix::identity(n, n), &DMatrix::zeros(m + nyc, n)]);
    let d_top = hstack(&[plant.d(), &(plant.d() * actuate)]);
    let d_u = hstack(&[&DMatrix::identity(m, m), actuate]);
    let d_r = hstack(&[&DMatrix::zeros(nyc, m), &DMatrix::identity(nyc, nyc)]);
    let d = vstack(&[&d_top, &DMatrix::zeros(n, m + nyc), &d_u, &d_r]);
    let f = vstack(&[plant.f(), &DMatrix::zeros(n + m + nyc, plant.error_dim())]);
    debug_assert_eq!(c.nrows(), q + n + m + nyc);
    Ok(LtiSystem::new(plant.a().clone(), b, c, d, plant.timing())?
        .with_disturbance(plant.e().clone(), plant.w().clone())?
        .with_measurement_error(f, plant.v().clone())?
        .with_error_to_state(plant.ev().clone())?)
}

/// Closed loop of `plant` and `controller` under `wiring`.
///
/// Input is the reference share `u_ref` of the plant input; outputs are the
/// tracking channels followed by the constraint channels. The state is
/// `[x_p; x_c]`, and the noise channels are those of the plant followed by
/// those of the controller.
pub fn closed_loop(plant: &LtiSystem, controller: &LtiSystem, wiring: &Wiring) -> Result<LtiSystem, SynthError> {
    wiring.check(plant, controller)?;
    let timing = plant.timing();
    let (m, nyc) = (plant.inputs(), controller.outputs());
    let wide = widen_plant(plant, &wiring.actuate)?;

    let read = hstack(&[&wiring.measure, &DMatrix::zeros(controller.inputs(), nyc)]);
    let write = vstack(&[&DMatrix::zeros(m, nyc), &DMatrix::identity(nyc, nyc)]);
    let chain = series(&series(&LtiSystem::static_gain(read, timing)?, controller)?, &LtiSystem::static_gain(write, timing)?)?;
    let looped = feedback(&wide, &chain)?;

    let reference = vstack(&[&DMatrix::identity(m, m), &DMatrix::zeros(nyc, m)]);
    let select = vstack(&[&wiring.tracking, &wiring.constrained]);
    Ok(series(&series(&LtiSystem::static_gain(reference, timing)?, &looped)?, &LtiSystem::static_gain(select, timing)?)?)
}
