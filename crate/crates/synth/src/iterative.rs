use reach::{check_conformance, ConformanceOptions};
use serde::Serialize;
use sysmodel::TestSuite;

use crate::{synth_with_identification, IdentSetup, SynthError, SynthResult, SynthesisProblem};

#[derive(Debug, Clone)]
pub struct IterativeOptions {
    pub max_iters: usize,
    /// A candidate is infeasible once the cost of the joint
    /// identification-and-synthesis solve exceeds this multiple of the first
    /// iteration's.
    pub infeasible_ratio: f64,
    pub conformance: ConformanceOptions,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self { max_iters: 5, infeasible_ratio: 10.0, conformance: ConformanceOptions { tol: 1e-9, sliding: true } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    /// Fresh data was not conformant; it joins the identification data.
    Continue,
    Converged,
    Infeasible,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub status: IterationStatus,
    /// Terminal-set cost of the synthesized loop (absent when synthesis failed).
    pub cost: Option<f64>,
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub ident_cost: Option<f64>,
    pub alpha_w: Vec<f64>,
    pub alpha_v: Vec<f64>,
    /// Conformance violations of the data recorded with `theta`.
    pub violations: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IterativeOutcome {
    Converged,
    Infeasible,
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub outcome: IterativeOutcome,
    pub rows: Vec<IterationRow>,
    /// Result of the last successful synthesis.
    pub result: Option<SynthResult>,
    pub plant_runs: usize,
}

/// Alternates identification-for-control and plant runs until fresh data is
/// conformant with the identified model.
///
/// `runner(iteration, θ)` runs the plant under the synthesized parameters and
/// returns the recorded suite.
pub fn iterative_synthesis<R>(
    p: &SynthesisProblem,
    initial_suite: &TestSuite,
    setup: &IdentSetup,
    mut runner: R,
    opts: &IterativeOptions,
) -> Result<SynthReport, SynthError>
where
    R: FnMut(usize, &[f64]) -> Result<TestSuite, SynthError>,
{
    let mut data = initial_suite.clone();
    let mut rows = Vec::new();
    let mut first_cost: Option<f64> = None;
    let mut last: Option<SynthResult> = None;
    let mut plant_runs = 0;
    let infeasible = |iteration: usize, note: String, ident: Option<&conform::IdentResult>| IterationRow {
        iteration,
        status: IterationStatus::Infeasible,
        cost: None,
        names: p.template.names(),
        theta: Vec::new(),
        ident_cost: ident.map(|r| r.cost),
        alpha_w: ident.map(|r| r.alpha_w.clone()).unwrap_or_default(),
        alpha_v: ident.map(|r| r.alpha_v.clone()).unwrap_or_default(),
        violations: None,
        note: Some(note),
    };

    for iteration in 1..=opts.max_iters {
        let (result, ident, model) = match synth_with_identification(p, &data, setup) {
            Ok(r) => r,
            Err(e @ (SynthError::NoFeasible { .. } | SynthError::Reach(_))) => {
                rows.push(infeasible(iteration, e.to_string(), None));
                return Ok(SynthReport { outcome: IterativeOutcome::Infeasible, rows, result: last, plant_runs });
            }
            Err(e) => return Err(e),
        };
        let first = *first_cost.get_or_insert(result.cost);
        if first > 0.0 && result.cost > opts.infeasible_ratio * first {
            let note = format!("synthesis cost {:.6e} exceeds {}× the first iteration's {:.6e}", result.cost, opts.infeasible_ratio, first);
            let mut row = infeasible(iteration, note, Some(&ident));
            row.cost = Some(result.cost);
            row.theta = result.theta.clone();
            rows.push(row);
            return Ok(SynthReport { outcome: IterativeOutcome::Infeasible, rows, result: last, plant_runs });
        }

        let fresh = runner(iteration, &result.theta)?;
        plant_runs += 1;
        let conformance = check_conformance(&model, &fresh, setup.options.k_end, &opts.conformance)?;
        let status = if conformance.passed { IterationStatus::Converged } else { IterationStatus::Continue };
        rows.push(IterationRow {
            iteration,
            status,
            cost: Some(result.cost),
            names: result.names.clone(),
            theta: result.theta.clone(),
            ident_cost: Some(ident.cost),
            alpha_w: ident.alpha_w.clone(),
            alpha_v: ident.alpha_v.clone(),
            violations: Some(conformance.violations.len()),
            note: None,
        });
        last = Some(result);
        if conformance.passed {
            return Ok(SynthReport { outcome: IterativeOutcome::Converged, rows, result: last, plant_runs });
        }
        data.extend(fresh)?;
    }
    Ok(SynthReport { outcome: IterativeOutcome::BudgetExhausted, rows, result: last, plant_runs })
}
