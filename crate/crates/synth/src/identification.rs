use conform::{identify_full, FreeEntry, FullOptions, IdentOptions, IdentResult};
use sysmodel::{LtiSystem, TestSuite};

use crate::{synth_controller, SynthError, SynthResult, SynthesisProblem};

/// How the plant uncertainty is identified before synthesis.
#[derive(Debug, Clone)]
pub struct IdentSetup {
    /// Model the suite is identified on. Its identified `W` and `V` replace
    /// those of the synthesis plant, so both must share noise channels.
    pub model: LtiSystem,
    pub options: IdentOptions,
    /// Matrix entries searched during identification; the identified values
    /// are written into both the model and the synthesis plant.
    pub free: Vec<FreeEntry>,
    pub budget: usize,
}

impl IdentSetup {
    pub fn new(model: LtiSystem, options: IdentOptions) -> Self {
        Self { model, options, free: Vec::new(), budget: 200 }
    }
}

/// Identifies `W` and `V` on `suite` (conformance constraints over the
/// truncated horizon), then synthesizes the controller for the plant carrying
/// the identified sets.
///
/// Returns the identified model alongside the results; it is the reference
/// for conformance checks of later data.
pub fn synth_with_identification(p: &SynthesisProblem, suite: &TestSuite, setup: &IdentSetup) -> Result<(SynthResult, IdentResult, LtiSystem), SynthError> {
    let full = identify_full(&setup.model, &setup.free, suite, &FullOptions { ident: setup.options.clone(), budget: setup.budget, starts: 1, seed: p.seed })?;
    let mut plant = p.plant.clone();
    for (f, &v) in setup.free.iter().zip(&full.entries) {
        plant = plant.with_entry(f.which, f.row, f.col, v)?;
    }
    if plant.w().dim() != full.system.w().dim() || plant.v().dim() != full.system.v().dim() {
        return Err(SynthError::Invalid("identification model and plant have different noise channels".into()));
    }
    let plant = plant.with_w(full.system.w().clone())?.with_v(full.system.v().clone())?;
    let problem = SynthesisProblem { plant, ..p.clone() };
    let result = synth_controller(&problem)?;
    Ok((result, full.ident, full.system))
}
