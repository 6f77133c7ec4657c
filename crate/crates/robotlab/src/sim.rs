use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use setlib::Zonotope;
use sysmodel::{discretize, LtiSystem, TestCase, TestSuite, Timing};

use crate::candidates::{observer_discrete, JointModelKind};
use crate::{ControllerGains, LabConfig, LabError, ObserverGains, Reference};

/// Width of the lab state recorded with every sample:
/// `[u_prev, q, q̇, m_prev, o₁, o₂, q̂, dq̂, q_m, q̇_m]` where `u_prev` is the
/// previous command, `m_prev` the previous encoder reading, `o` the
/// observer's internal state and `(q_m, q̇_m)` the joint state at the instant
/// the observer's current input was sampled. Every candidate state is a
/// selection of it; a delay state on the estimate holds the estimate the
/// controller sees now.
pub const LAB_STATE: usize = 10;

/// Synthetic ground truth for one joint under feedback linearization: a
/// double integrator with bounded disturbance, a quantized noisy encoder,
/// unit delays and the discrete observer, closed by the PD law on the
/// estimate.
#[derive(Debug, Clone)]
pub struct JointPlantSim {
    pub dt: f64,
    /// `W_true` on `(q, q̇)`, continuous units.
    pub disturbance: Zonotope,
    pub encoder_noise: f64,
    pub quantization: f64,
    pub input_delay: bool,
    pub output_delay: bool,
    pub observer: ObserverGains,
    /// Commands are clipped to `±input_limit`.
    pub input_limit: f64,
    pub vertex_fraction: f64,
    /// Unmodelled actuator time constant, seconds; 0 disables it.
    pub actuator_lag: f64,
    pub seed: u64,
}

impl JointPlantSim {
    pub fn from_config(cfg: &LabConfig) -> Result<Self, LabError> {
        cfg.validate()?;
        let p = &cfg.plant;
        Ok(Self {
            dt: cfg.dt,
            disturbance: Zonotope::centered_box(DVector::zeros(2), &p.disturbance)?,
            encoder_noise: p.encoder_noise,
            quantization: p.quantization,
            input_delay: p.input_delay == 1,
            output_delay: p.output_delay == 1,
            observer: cfg.observer,
            input_limit: cfg.input_limit(),
            vertex_fraction: p.vertex_fraction,
            actuator_lag: p.actuator_lag,
            seed: cfg.seed,
        })
    }

    fn quantize(&self, q: f64) -> f64 {
        if self.quantization > 0.0 {
            self.quantization * (q / self.quantization).round()
        } else {
            q
        }
    }
}

/// One closed-loop run. Column `k` of `lab_state` is the lab state at step
/// `k`; `command[k]` is sent at step `k` and `estimate[k]` is what the
/// controller saw.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRun {
    pub command: Vec<f64>,
    pub estimate: DMatrix<f64>,
    pub lab_state: DMatrix<f64>,
}

impl JointRun {
    pub fn len(&self) -> usize {
        self.command.len()
    }

    pub fn is_empty(&self) -> bool {
        self.command.is_empty()
    }

    /// Test case in lab coordinates: input the command, output the estimate.
    pub fn to_case(&self) -> Result<TestCase, LabError> {
        let u = DMatrix::from_row_slice(1, self.len(), &self.command);
        Ok(TestCase::new(u, self.estimate.clone(), self.lab_state.column(0).into_owned())?.with_state_trace(self.lab_state.clone())?)
    }
}

/// Draws from the generator cube of `z`; a `vertex` share lands on corners.
fn draw(rng: &mut ChaCha8Rng, z: &Zonotope, vertex: f64) -> DVector<f64> {
    let g = z.generators();
    let corner = rng.gen_bool(vertex);
    let beta = DVector::from_fn(g.ncols(), |_, _| {
        if corner {
            if rng.gen_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        } else {
            rng.gen_range(-1.0..=1.0)
        }
    });
    z.center() + g * beta
}

fn draw_scalar(rng: &mut ChaCha8Rng, half: f64, vertex: f64) -> f64 {
    if half == 0.0 {
        return 0.0;
    }
    if rng.gen_bool(vertex) {
        if rng.gen_bool(0.5) {
            half
        } else {
            -half
        }
    } else {
        half * rng.gen_range(-1.0..=1.0)
    }
}

/// Exact sampled joint `x⁺ = A x + B u + E w` with `x = (q, q̇)`, or
/// `(q, q̇, a)` when the acceleration `a` lags the command.
fn joint_discrete(dt: f64, lag: f64) -> Result<LtiSystem, LabError> {
    let c = if lag > 0.0 {
        LtiSystem::new(
            nalgebra::dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; 0.0, 0.0, -1.0 / lag],
            nalgebra::dmatrix![0.0; 0.0; 1.0 / lag],
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 1),
            Timing::Continuous,
        )?
        .with_disturbance(DMatrix::identity(3, 2), Zonotope::origin(2))?
    } else {
        LtiSystem::new(nalgebra::dmatrix![0.0, 1.0; 0.0, 0.0], nalgebra::dmatrix![0.0; 1.0], DMatrix::identity(2, 2), DMatrix::zeros(2, 1), Timing::Continuous)?
            .with_disturbance(DMatrix::identity(2, 2), Zonotope::origin(2))?
    };
    Ok(discretize(&c, dt)?)
}

impl JointPlantSim {
    /// Runs the loop along `reference` with noise stream `stream`.
    pub fn run(&self, reference: &Reference, gains: ControllerGains, stream: u64) -> Result<JointRun, LabError> {
        let n = reference.len();
        let joint = joint_discrete(self.dt, self.actuator_lag)?;
        let obs = observer_discrete(&self.observer, self.dt)?;
        let (ja, jb, je) = (joint.a(), joint.b(), joint.e());
        let (oa, ob, oc, od) = (obs.a(), obs.b(), obs.c(), obs.d());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);

        let (kp, kd) = (gains.kp(), gains.kd());
        let q0 = reference.position.first().copied().unwrap_or(0.0);
        let mut x = DVector::zeros(joint.order());
        x[0] = q0;
        // Observer at rest on the first reading: (I − A_o) o = B_o q₀.
        let meas0 = self.quantize(q0);
        let mut o = (DMatrix::identity(2, 2) - oa).lu().solve(&(ob * meas0)).ok_or_else(|| LabError::Config("observer has a unit pole".into()))?;
        let mut u_prev = 0.0;
        let mut m_prev = meas0;
        let mut x_prev = x.clone();

        let mut command = Vec::with_capacity(n);
        let mut estimate = DMatrix::zeros(2, n);
        let mut lab = DMatrix::zeros(LAB_STATE, n);
        for k in 0..n {
            let m = self.quantize(x[0]) + draw_scalar(&mut rng, self.encoder_noise, self.vertex_fraction);
            let obs_in = if self.output_delay { m_prev } else { m };
            let est: DVector<f64> = oc * &o + od.column(0) * obs_in;
            let (qd, vd, ad) = (reference.position[k], reference.velocity[k], reference.acceleration[k]);
            let u = (ad + kp * (qd - est[0]) + kd * (vd - est[1])).clamp(-self.input_limit, self.input_limit);

            let sampled = if self.output_delay { &x_prev } else { &x };
            let state = [u_prev, x[0], x[1], m_prev, o[0], o[1], est[0], est[1], sampled[0], sampled[1]];
            lab.column_mut(k).copy_from_slice(&state);
            estimate.set_column(k, &est);
            command.push(u);

            let applied = if self.input_delay { u_prev } else { u };
            let w = draw(&mut rng, &self.disturbance, self.vertex_fraction);
            x_prev = x.clone();
            x = ja * &x + jb * applied + je * w;
            o = oa * &o + ob * obs_in;
            u_prev = u;
            m_prev = m;
        }
        Ok(JointRun { command, estimate, lab_state: lab })
    }

    /// Runs every reference, in parallel; run `i` uses noise stream `i + 1`.
    pub fn run_all(&self, references: &[Reference], gains: ControllerGains) -> Result<Vec<JointRun>, LabError> {
        references.par_iter().enumerate().map(|(i, r)| self.run(r, gains, i as u64 + 1)).collect()
    }
}

/// Suite in lab coordinates with sliding-window state traces.
pub fn runs_to_suite(runs: &[JointRun], dt: f64) -> Result<TestSuite, LabError> {
    let cases = runs.iter().filter(|r| !r.is_empty()).map(JointRun::to_case).collect::<Result<Vec<_>, _>>()?;
    Ok(TestSuite::from_cases(dt, cases)?)
}

/// Closed-loop simulation of every reference, exported in lab coordinates.
pub fn simulate_suite(sim: &JointPlantSim, references: &[Reference], gains: ControllerGains) -> Result<TestSuite, LabError> {
    runs_to_suite(&sim.run_all(references, gains)?, sim.dt)
}

/// Rows of the lab state that form the candidate's state. Delay-free
/// candidates take the joint state at the instant of the measurement the
/// controller is using, since that is all their structure can explain.
pub fn lab_selection(kind: JointModelKind) -> &'static [usize] {
    match kind {
        JointModelKind::Rc | JointModelKind::Rd => &[8, 9],
        JointModelKind::ROc => &[8, 9, 6, 7],
        JointModelKind::ROd => &[8, 9, 4, 5],
        JointModelKind::RDd => &[0, 1, 2, 6, 7],
        JointModelKind::RODd => &[0, 1, 2, 3, 4, 5],
    }
}

/// Re-expresses a lab-coordinate suite in the state of `kind`.
pub fn project_suite(suite: &TestSuite, kind: JointModelKind) -> Result<TestSuite, LabError> {
    let rows = lab_selection(kind);
    let mut out = TestSuite::new(suite.sample_time);
    for case in suite.cases() {
        if case.initial_state.len() != LAB_STATE {
            return Err(LabError::Config(format!("suite state has {} entries, lab state has {LAB_STATE}", case.initial_state.len())));
        }
        let mut c = TestCase::new(case.inputs.clone(), case.outputs.clone(), case.initial_state.select_rows(rows))?;
        if let Some(t) = &case.state_trace {
            c = c.with_state_trace(t.select_rows(rows))?;
        }
        out.push(c)?;
    }
    Ok(out)
}
