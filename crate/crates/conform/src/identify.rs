use std::time::Instant;

use nalgebra::DVector;
use optim::{solve_lp, LpError};
use reach::{check_conformance, deviation_tube, ConformanceOptions, ConformanceReport};
use serde::Serialize;
use setlib::Zonotope;
use sysmodel::{LtiSystem, TestSuite};

use crate::{build_ident_lp, DataOptions, DeviationData, IdentError, LpBuildOptions};

/// One identification variable, for pinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoiseParam {
    CenterW(usize),
    CenterV(usize),
    ScaleW(usize),
    ScaleV(usize),
}

#[derive(Debug, Clone)]
pub struct IdentOptions {
    pub k_end: usize,
    pub sliding: bool,
    pub aggregate: bool,
    /// Variables held at a given value.
    pub fixed: Vec<(NoiseParam, f64)>,
    /// Re-check conformance of the identified model on the identifying suite.
    pub self_check: bool,
    pub conformance_tol: f64,
}

impl Default for IdentOptions {
    fn default() -> Self {
        Self { k_end: 500, sliding: true, aggregate: true, fixed: Vec::new(), self_check: true, conformance_tol: 1e-9 }
    }
}

impl IdentOptions {
    pub fn with_horizon(k_end: usize) -> Self {
        Self { k_end, ..Default::default() }
    }

    /// Pins both noise centers at zero.
    pub fn centered(mut self, sys: &LtiSystem) -> Self {
        self.fixed.extend((0..sys.disturbance_dim()).map(|i| (NoiseParam::CenterW(i), 0.0)));
        self.fixed.extend((0..sys.error_dim()).map(|i| (NoiseParam::CenterV(i), 0.0)));
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LpStats {
    pub variables: usize,
    pub rows: usize,
    pub directions: usize,
    pub working_rows: usize,
    pub rounds: usize,
    pub pivots: usize,
    /// Wall-clock solve time; left out of serialized reports.
    #[serde(skip)]
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentResult {
    pub c_w: Vec<f64>,
    pub c_v: Vec<f64>,
    pub alpha_w: Vec<f64>,
    pub alpha_v: Vec<f64>,
    /// `t_s Σ_k znorm(R_a[k])` at the identified parameters.
    pub cost: f64,
    /// Cost split by output axis.
    pub axis_cost: Vec<f64>,
    pub lp: LpStats,
    pub conformance: Option<ConformanceReport>,
}

impl IdentResult {
    /// `sys` with `W = (c_W, G′_W diag α_W)` and `V` likewise.
    pub fn apply(&self, sys: &LtiSystem) -> Result<LtiSystem, IdentError> {
        let w = Zonotope::new(DVector::from_vec(self.c_w.clone()), sys.w().templates().clone(), DVector::from_vec(self.alpha_w.clone()))?;
        let v = Zonotope::new(DVector::from_vec(self.c_v.clone()), sys.v().templates().clone(), DVector::from_vec(self.alpha_v.clone()))?;
        Ok(sys.clone().with_w(w)?.with_v(v)?)
    }
}

/// Solves the identification LP on prepared data. No conformance re-check.
pub fn identify_from_data(sys: &LtiSystem, data: &DeviationData, opts: &IdentOptions) -> Result<(LtiSystem, IdentResult), IdentError> {
    let mut prog = build_ident_lp(sys, data, &LpBuildOptions { aggregate: opts.aggregate, ..Default::default() })?;
    let l = prog.layout;
    for &(p, value) in &opts.fixed {
        let (j, limit) = match p {
            NoiseParam::CenterW(i) => (i, l.nw),
            NoiseParam::CenterV(i) => (l.nw + i, l.nw + l.nv),
            NoiseParam::ScaleW(i) => (l.centers() + i, l.centers() + l.gw),
            NoiseParam::ScaleV(i) => (l.centers() + l.gw + i, l.len()),
        };
        if j >= limit {
            return Err(IdentError::Invalid(format!("{p:?} does not exist in this model")));
        }
        prog.lp.lower[j] = value;
        prog.lp.upper[j] = value;
    }
    let started = Instant::now();
    let sol = solve_lp(&prog.lp).map_err(|e| match e {
        // Free centers and unbounded scales always admit a solution.
        LpError::Infeasible if opts.fixed.is_empty() => IdentError::Invalid("identification LP infeasible without pinned variables (internal error)".into()),
        e => e.into(),
    })?;
    let solve_seconds = started.elapsed().as_secs_f64();

    let x = &sol.x;
    // Round tiny negative scales from the solver back onto the bound.
    let scale = |j: usize| x[j].max(0.0);
    let result = IdentResult {
        c_w: (0..l.nw).map(|i| x[i]).collect(),
        c_v: (0..l.nv).map(|i| x[l.nw + i]).collect(),
        alpha_w: (0..l.gw).map(|i| scale(l.centers() + i)).collect(),
        alpha_v: (0..l.gv).map(|i| scale(l.centers() + l.gw + i)).collect(),
        cost: sol.cost,
        axis_cost: Vec::new(),
        lp: LpStats {
            variables: l.len(),
            rows: prog.lp.num_rows(),
            directions: prog.directions,
            working_rows: sol.working_rows.len(),
            rounds: sol.rounds,
            pivots: sol.pivots,
            solve_seconds,
        },
        conformance: None,
    };
    let identified = result.apply(sys)?;
    let axis_cost = axis_cost(&identified, data.k_end, data.sample_time)?;
    Ok((identified, IdentResult { axis_cost, ..result }))
}

fn axis_cost(sys: &LtiSystem, k_end: usize, t_s: f64) -> Result<Vec<f64>, IdentError> {
    let mut acc = DVector::zeros(sys.outputs());
    for z in deviation_tube(sys, k_end)? {
        acc += z.half_widths() * t_s;
    }
    Ok(acc.iter().copied().collect())
}

/// Identifies `W` and `V` from a suite and re-checks conformance on it.
pub fn identify_uncertainty(sys: &LtiSystem, suite: &TestSuite, opts: &IdentOptions) -> Result<(LtiSystem, IdentResult), IdentError> {
    let data = DeviationData::build(sys, suite, opts.k_end, &DataOptions { sliding: opts.sliding, keep_raw: !opts.aggregate })?;
    let (identified, mut result) = identify_from_data(sys, &data, opts)?;
    if opts.self_check {
        let report = check_conformance(&identified, suite, opts.k_end, &ConformanceOptions { tol: opts.conformance_tol, sliding: opts.sliding })?;
        if !report.passed {
            return Err(IdentError::SelfCheck { violations: report.violations.len(), max_margin: report.max_margin });
        }
        result.conformance = Some(report);
    }
    Ok((identified, result))
}
