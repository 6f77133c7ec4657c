use optim::{minimize_dfo, DfoProblem, Evaluation};
use serde::Serialize;
use sysmodel::{LtiSystem, MatrixId, TestSuite};

use crate::{identify_from_data, identify_uncertainty, DataOptions, DeviationData, IdentError, IdentOptions, IdentResult};

/// A system-matrix entry searched over `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEntry {
    pub which: MatrixId,
    pub row: usize,
    pub col: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct FullOptions {
    pub ident: IdentOptions,
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for FullOptions {
    fn default() -> Self {
        Self { ident: IdentOptions::default(), budget: 400, starts: 1, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FullResult {
    pub system: LtiSystem,
    pub ident: IdentResult,
    /// Values of the free entries, in the given order.
    pub entries: Vec<f64>,
    pub evaluations: usize,
}

/// Outer derivative-free search over free matrix entries; every evaluation
/// identifies `W` and `V` by linear programming and scores the LP cost.
pub fn identify_full(template: &LtiSystem, free: &[FreeEntry], suite: &TestSuite, opts: &FullOptions) -> Result<FullResult, IdentError> {
    if free.is_empty() {
        let (system, ident) = identify_uncertainty(template, suite, &opts.ident)?;
        return Ok(FullResult { system, ident, entries: vec![], evaluations: 1 });
    }
    let with_entries = |theta: &[f64]| -> Result<LtiSystem, IdentError> {
        let mut sys = template.clone();
        for (f, &v) in free.iter().zip(theta) {
            sys = sys.with_entry(f.which, f.row, f.col, v)?;
        }
        Ok(sys)
    };
    let data_opts = DataOptions { sliding: opts.ident.sliding, keep_raw: !opts.ident.aggregate };
    let objective = |theta: &[f64]| -> Evaluation {
        let run = || -> Result<f64, IdentError> {
            let sys = with_entries(theta)?;
            let data = DeviationData::build(&sys, suite, opts.ident.k_end, &data_opts)?;
            Ok(identify_from_data(&sys, &data, &opts.ident)?.1.cost)
        };
        match run() {
            Ok(c) => Evaluation::feasible(c),
            Err(IdentError::Coverage { excess, .. }) => Evaluation::infeasible(f64::INFINITY, excess),
            Err(_) => Evaluation::infeasible(f64::INFINITY, 1.0),
        }
    };
    let bounds: Vec<(f64, f64)> = free.iter().map(|f| (f.lower, f.upper)).collect();
    let start: Vec<f64> = free.iter().map(|f| template.entry(f.which, f.row, f.col).unwrap_or(f.lower).clamp(f.lower, f.upper)).collect();
    let per_start = opts.budget.div_ceil(opts.starts.max(1));
    let problem = DfoProblem::new(objective, bounds, start, opts.budget).with_starts(opts.starts.max(1), per_start, opts.seed);
    let best = minimize_dfo(&problem)?;
    let sys = with_entries(&best.best)?;
    let (system, ident) = identify_uncertainty(&sys, suite, &opts.ident)?;
    Ok(FullResult { system, ident, entries: best.best, evaluations: best.evaluations })
}
