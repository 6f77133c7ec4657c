use std::path::Path;

use anyhow::anyhow;
use conform::{identify_uncertainty, IdentError, IdentOptions};
use nalgebra::{DMatrix, DVector};
use reach::{check_conformance, reach_horizon, terminal_reach, ConformanceOptions, TerminalOptions};
use robotlab::design::{candidate_params, ident_options};
use robotlab::{
    analysis_model, gen_references, initial_suite, lab_design, observer_a2_problem, project_suite, simulate_suite, validation_suite, JointModelKind,
    JointPlantSim, LabConfig, SynthMode, LAB_STATE,
};
use serde::Serialize;
use setlib::Zonotope;
use synth::{iterative_synthesis, observer_transient_synthesis, transient_time, IterationRow, IterativeOptions, IterativeOutcome, SweepPoint, SynthError};
use sysmodel::io::{read_model, read_suite, read_trace, write_model, write_suite};
use sysmodel::{LtiSystem, TestSuite};

use crate::{finish, CheckArgs, CmdResult, Failure, IdentifyArgs, Outcome, ReachArgs, SimulateArgs, SynthArgs};

fn ident_failure(e: IdentError) -> Failure {
    match e {
        IdentError::Coverage { .. } => Failure::coverage(e),
        IdentError::Invalid(_) | IdentError::System(_) => Failure::config(e),
        e => Failure::internal(e),
    }
}

fn synth_failure(e: SynthError) -> Failure {
    match e {
        SynthError::Ident(e) => ident_failure(e),
        e @ (SynthError::Invalid(_) | SynthError::System(_)) => Failure::config(e),
        e => Failure::internal(e),
    }
}

fn load_suite(dir: &Path) -> Result<TestSuite, Failure> {
    let suite = read_suite(dir).map_err(|e| Failure::config(anyhow!("suite {}: {e}", dir.display())))?;
    if suite.is_empty() {
        return Err(Failure::config(anyhow!("suite {} has no cases", dir.display())));
    }
    Ok(suite)
}

fn load_model(path: &Path) -> Result<LtiSystem, Failure> {
    read_model(path).map_err(|e| Failure::config(anyhow!("model {}: {e}", path.display())))
}

/// Projects a lab-coordinate suite; suites already in candidate coordinates
/// pass through unchanged.
fn candidate_suite(suite: &TestSuite, kind: JointModelKind) -> Result<TestSuite, Failure> {
    match suite.dims() {
        Some((_, _, n)) if n == LAB_STATE => project_suite(suite, kind).map_err(Failure::config),
        _ => Ok(suite.clone()),
    }
}

fn axis_seed(cfg: &LabConfig, axis: usize) -> u64 {
    cfg.seed.wrapping_add(axis as u64 - 1)
}

#[derive(Serialize)]
struct AxisSummary {
    axis: usize,
    directory: String,
    cases: usize,
    samples: usize,
    /// Largest command magnitude sent to the plant.
    peak_command: f64,
}

pub fn simulate(cfg: &LabConfig, a: &SimulateArgs, out: &Path) -> CmdResult {
    let mut cfg = cfg.clone();
    if let Some(d) = a.duration {
        cfg.references.duration = d;
    }
    if let Some(c) = a.count {
        cfg.references.count = c;
    }
    let axes = if a.axes.is_empty() { vec![cfg.axis] } else { a.axes.clone() };
    let mut summaries = Vec::new();
    for &axis in &axes {
        // Axis 1 reproduces the config seed; other axes offset it.
        let axis_cfg = LabConfig { axis, seed: axis_seed(&cfg, axis), ..cfg.clone() };
        axis_cfg.validate().map_err(Failure::config)?;
        let sim = JointPlantSim::from_config(&axis_cfg).map_err(Failure::config)?;
        let refs = gen_references(axis_cfg.seed, &axis_cfg.references, axis_cfg.dt);
        let suite = simulate_suite(&sim, &refs, axis_cfg.gains).map_err(Failure::internal)?;
        let dir = format!("axis_{axis}");
        write_suite(&out.join(&dir), &suite).map_err(Failure::config)?;
        let peak_command = suite.cases().iter().map(|c| c.inputs.amax()).fold(0.0, f64::max);
        summaries.push(AxisSummary { axis, directory: dir, cases: suite.len(), samples: suite.cases().iter().map(|c| c.len()).sum(), peak_command });
    }
    #[derive(Serialize)]
    struct Body {
        axes: Vec<AxisSummary>,
    }
    finish(out, "simulate", &cfg, Body { axes: summaries })?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct IdentRow {
    candidate: String,
    cost: f64,
    c_w: Vec<f64>,
    c_v: Vec<f64>,
    alpha_w: Vec<f64>,
    alpha_v: Vec<f64>,
    axis_cost: Vec<f64>,
    conformant: bool,
    lp_rows: usize,
    model: String,
}

pub fn identify(cfg: &LabConfig, a: &IdentifyArgs, out: &Path) -> CmdResult {
    let mut cfg = cfg.clone();
    if let Some(h) = a.horizon {
        cfg.ident_horizon = h;
    }
    cfg.validate().map_err(Failure::config)?;
    let mut rows = Vec::new();
    let mut run = |name: String, model: &LtiSystem, suite: &TestSuite, opts: &IdentOptions| -> Result<(), Failure> {
        let (identified, r) = identify_uncertainty(model, suite, opts).map_err(ident_failure)?;
        let file = format!("model_{name}.json");
        write_model(&out.join(&file), &identified).map_err(Failure::config)?;
        rows.push(IdentRow {
            candidate: name,
            cost: r.cost,
            c_w: r.c_w,
            c_v: r.c_v,
            alpha_w: r.alpha_w,
            alpha_v: r.alpha_v,
            axis_cost: r.axis_cost,
            conformant: r.conformance.as_ref().is_none_or(|c| c.passed),
            lp_rows: r.lp.rows,
            model: file,
        });
        Ok(())
    };
    if let Some(path) = &a.model {
        let suite = match &a.suite {
            Some(dir) => load_suite(dir)?,
            None => return Err(Failure::config(anyhow!("--model needs --suite"))),
        };
        let model = load_model(path)?;
        let opts = IdentOptions { sliding: cfg.sliding, ..IdentOptions::with_horizon(cfg.ident_horizon) };
        run("custom".into(), &model, &suite, &opts)?;
    } else {
        let kinds = if a.candidates.is_empty() { vec![JointModelKind::RODd] } else { a.candidates.clone() };
        let lab = match &a.suite {
            Some(dir) => load_suite(dir)?,
            None => initial_suite_lab(&cfg)?,
        };
        for kind in kinds {
            let model = analysis_model(kind, &candidate_params(&cfg)).map_err(Failure::config)?;
            let suite = candidate_suite(&lab, kind)?;
            run(kind.to_string(), &model, &suite, &ident_options(&cfg, &model))?;
        }
    }
    #[derive(Serialize)]
    struct Body {
        candidates: Vec<IdentRow>,
    }
    finish(out, "identify", &cfg, Body { candidates: rows })?;
    Ok(Outcome::Success)
}

/// Initial identification data in lab coordinates.
fn initial_suite_lab(cfg: &LabConfig) -> Result<TestSuite, Failure> {
    let sim = JointPlantSim::from_config(cfg).map_err(Failure::config)?;
    let refs = gen_references(cfg.seed, &cfg.references, cfg.dt);
    simulate_suite(&sim, &refs, cfg.gains).map_err(Failure::internal)
}

pub fn check(cfg: &LabConfig, a: &CheckArgs, out: &Path) -> CmdResult {
    let model = load_model(&a.model)?;
    let mut suite = load_suite(&a.suite)?;
    if let Some(kind) = a.candidate {
        suite = candidate_suite(&suite, kind)?;
    }
    let horizon = a.horizon.unwrap_or(cfg.ident_horizon);
    let report = check_conformance(&model, &suite, horizon, &ConformanceOptions { tol: 1e-9, sliding: cfg.sliding }).map_err(Failure::config)?;
    #[derive(Serialize)]
    struct Body {
        horizon: usize,
        conformant: bool,
        windows: usize,
        samples_checked: usize,
        violations: usize,
        max_margin: Option<f64>,
        first_violations: Vec<reach::Violation>,
    }
    let body = Body {
        horizon,
        conformant: report.passed,
        windows: report.windows,
        samples_checked: report.samples_checked,
        violations: report.violations.len(),
        max_margin: report.max_margin.is_finite().then_some(report.max_margin),
        first_violations: report.violations.iter().take(20).cloned().collect(),
    };
    finish(out, "check", cfg, body)?;
    Ok(Outcome::Success)
}

fn default_candidate(mode: SynthMode) -> JointModelKind {
    match mode {
        SynthMode::StateFeedback => JointModelKind::RODd,
        _ => JointModelKind::RDd,
    }
}

pub fn synth(cfg: &LabConfig, a: &SynthArgs, out: &Path) -> CmdResult {
    let mut cfg = cfg.clone();
    if let Some(h) = a.horizon {
        cfg.ident_horizon = h;
    }
    cfg.validate().map_err(Failure::config)?;
    if a.mode == SynthMode::ObserverA2 {
        return synth_observer_a2(&cfg, a, out);
    }
    let kind = a.candidate.unwrap_or_else(|| default_candidate(a.mode));
    let mut design = lab_design(&cfg, a.mode, kind).map_err(Failure::config)?;
    if let Some(b) = a.budget {
        design.problem.budget = b;
    }
    if let Some(s) = a.starts {
        design.problem.starts = s;
    }
    let suite = match &a.suite {
        Some(dir) => candidate_suite(&load_suite(dir)?, kind)?,
        None => initial_suite(&cfg, kind).map_err(Failure::config)?,
    };
    let mode = a.mode;
    let runner = |iteration: usize, theta: &[f64]| validation_suite(&cfg, mode, kind, iteration, theta).map_err(|e| SynthError::Invalid(e.to_string()));
    let opts = IterativeOptions { max_iters: a.max_iters.max(1), ..Default::default() };
    let report = iterative_synthesis(&design.problem, &suite, &design.setup, runner, &opts).map_err(synth_failure)?;
    let outcome = match report.outcome {
        IterativeOutcome::Converged => Outcome::Success,
        IterativeOutcome::Infeasible => Outcome::Infeasible,
        IterativeOutcome::BudgetExhausted => Outcome::Budget,
    };
    #[derive(Serialize)]
    struct Body {
        mode: SynthMode,
        candidate: String,
        outcome: IterativeOutcome,
        plant_runs: usize,
        iterations: Vec<IterationRow>,
        parameters: Option<Vec<(String, f64)>>,
        cost: Option<f64>,
        t_inf: Option<f64>,
    }
    let last = report.result.as_ref().filter(|_| report.outcome == IterativeOutcome::Converged);
    let body = Body {
        mode,
        candidate: kind.to_string(),
        outcome: report.outcome,
        plant_runs: report.plant_runs,
        parameters: last.map(|r| r.names.iter().cloned().zip(r.theta.iter().copied()).collect()),
        cost: last.map(|r| r.cost),
        t_inf: last.map(|r| r.t_inf),
        iterations: report.rows,
    };
    finish(out, "synth", &cfg, body)?;
    Ok(outcome)
}

fn synth_observer_a2(cfg: &LabConfig, a: &SynthArgs, out: &Path) -> CmdResult {
    let mut p = observer_a2_problem(cfg).map_err(Failure::config)?;
    if let Some(b) = a.budget {
        p.budget = b;
    }
    if let Some(s) = a.starts {
        p.starts = s;
    }
    #[derive(Serialize)]
    struct Body {
        mode: SynthMode,
        outcome: &'static str,
        parameters: Vec<(String, f64)>,
        t_inf: Option<f64>,
        converged_at: Option<usize>,
        /// Settling time at half and double the optimal gains.
        sweep: Vec<SweepPoint>,
        evaluations: usize,
    }
    let (body, outcome) = match observer_transient_synthesis(&p) {
        Ok(r) => {
            let sweep = [0.5, 2.0]
                .iter()
                .map(|s| transient_time(&p, &r.theta.iter().map(|t| t * s).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(synth_failure)?;
            let body = Body {
                mode: SynthMode::ObserverA2,
                outcome: "converged",
                parameters: r.names.iter().cloned().zip(r.theta.iter().copied()).collect(),
                t_inf: Some(r.t_inf),
                converged_at: Some(r.converged_at),
                sweep,
                evaluations: r.evaluations,
            };
            (body, Outcome::Success)
        }
        Err(SynthError::NoFeasible { evaluations }) => {
            let body = Body {
                mode: SynthMode::ObserverA2,
                outcome: "infeasible",
                parameters: Vec::new(),
                t_inf: None,
                converged_at: None,
                sweep: Vec::new(),
                evaluations,
            };
            (body, Outcome::Infeasible)
        }
        Err(e) => return Err(synth_failure(e)),
    };
    finish(out, "synth", cfg, body)?;
    Ok(outcome)
}

fn hull_rows(z: &Zonotope) -> (Vec<f64>, Vec<f64>) {
    let h = z.interval_hull();
    (h.lower().iter().copied().collect(), h.upper().iter().copied().collect())
}

pub fn reach(cfg: &LabConfig, a: &ReachArgs, out: &Path) -> CmdResult {
    let model = load_model(&a.model)?;
    if !model.is_discrete() {
        return Err(Failure::config(anyhow!("model {} is continuous; discretize it first", a.model.display())));
    }
    let n = model.order();
    let x0 = if a.x0.is_empty() { DVector::zeros(n) } else { DVector::from_vec(a.x0.clone()) };
    if x0.len() != n {
        return Err(Failure::config(anyhow!("--x0 has {} entries, the model has {n} states", x0.len())));
    }
    let x0 = Zonotope::point(x0);
    if a.terminal {
        // Non-convergence means an unstable model or too tight a tolerance.
        let t = terminal_reach(&model, &x0, &TerminalOptions::default()).map_err(Failure::config)?;
        let (lower, upper) = hull_rows(&t.output);
        #[derive(Serialize)]
        struct Body {
            converged_at: usize,
            t_inf: f64,
            lower: Vec<f64>,
            upper: Vec<f64>,
            hull_side_sum: f64,
            set: Zonotope,
        }
        let dt = model.timing().sample_time().unwrap_or(0.0);
        let body =
            Body { converged_at: t.converged_at, t_inf: t.converged_at as f64 * dt, lower, upper, hull_side_sum: t.output.hull_side_sum(), set: t.output };
        finish(out, "reach", cfg, body)?;
        return Ok(Outcome::Success);
    }
    let u = match &a.inputs {
        Some(path) => read_trace(path).map_err(|e| Failure::config(anyhow!("inputs {}: {e}", path.display())))?.0,
        None => DMatrix::zeros(model.inputs(), a.steps.map_or(101, |s| s + 1)),
    };
    if u.nrows() != model.inputs() {
        return Err(Failure::config(anyhow!("input trace has {} channels, the model has {}", u.nrows(), model.inputs())));
    }
    let last = a.steps.unwrap_or(u.ncols().saturating_sub(1));
    if last >= u.ncols() {
        return Err(Failure::config(anyhow!("--steps {last} exceeds the {} input samples", u.ncols())));
    }
    let tube = reach_horizon(&model, &x0, &u, last).map_err(Failure::config)?;
    let path = out.join("reach.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::config(anyhow!("{}: {e}", path.display())))?;
    w.write_record(["k", "dim", "lower", "upper"]).map_err(Failure::internal)?;
    for (k, set) in tube.sets.iter().enumerate() {
        let (lo, hi) = hull_rows(set);
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            w.write_record([k.to_string(), (i + 1).to_string(), format!("{l:?}"), format!("{h:?}")]).map_err(Failure::internal)?;
        }
    }
    w.flush().map_err(Failure::internal)?;
    #[derive(Serialize)]
    struct Body {
        steps: usize,
        tube: &'static str,
    }
    finish(out, "reach", cfg, Body { steps: tube.sets.len(), tube: "reach.csv" })?;
    Ok(Outcome::Success)
}
