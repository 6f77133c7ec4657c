use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use setlib::{constraint_normals, Zonotope, MAX_FACET_DIM};
use sysmodel::{nominal_output, LtiSystem, TestSuite};

use crate::{deviation_tube, ReachError};

#[derive(Debug, Clone, Copy)]
pub struct ConformanceOptions {
    /// Violation threshold relative to `1 + max(|y_a|, set radius)`.
    pub tol: f64,
    /// Start a window at every sample of cases that carry a state trace.
    pub sliding: bool,
}

impl Default for ConformanceOptions {
    fn default() -> Self {
        Self { tol: 1e-9, sliding: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub case: usize,
    /// First sample of the window within the case.
    pub start: usize,
    /// Step within the window.
    pub step: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub windows: usize,
    pub samples_checked: usize,
    /// Largest `max_facet (n·y_a − d)` over all samples; `-inf` when nothing was checked.
    pub max_margin: f64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Facet rows of a deviation set; `None` above the facet-enumeration limit.
struct Facets {
    normals: DMatrix<f64>,
    upper: DVector<f64>,
    lower: DVector<f64>,
}

fn facets(z: &Zonotope) -> Result<Option<Facets>, ReachError> {
    if z.dim() > MAX_FACET_DIM {
        return Ok(None);
    }
    let dirs = constraint_normals(&z.generators())?;
    let q = z.dim();
    let mut normals = DMatrix::zeros(dirs.len(), q);
    let mut upper = DVector::zeros(dirs.len());
    let mut lower = DVector::zeros(dirs.len());
    for (j, d) in dirs.iter().enumerate() {
        normals.set_row(j, &d.transpose());
        upper[j] = z.support(d);
        lower[j] = -z.support(&-d);
    }
    Ok(Some(Facets { normals, upper, lower }))
}

fn margin(z: &Zonotope, f: &Option<Facets>, y: &DVector<f64>, tol: f64) -> f64 {
    match f {
        Some(f) => {
            let p = &f.normals * y;
            (0..p.len()).map(|j| (p[j] - f.upper[j]).max(f.lower[j] - p[j])).fold(f64::NEG_INFINITY, f64::max)
        }
        None => {
            let hull = z.interval_hull();
            let box_margin = (y - hull.upper()).max().max((hull.lower() - y).max());
            if z.contains_point(y, tol) {
                box_margin.min(0.0)
            } else {
                box_margin.max(tol * 2.0)
            }
        }
    }
}

/// Checks every measured deviation `y − y*` against the deviation set of its
/// step, for steps `0..=k_end` of every window of the suite.
pub fn check_conformance(sys: &LtiSystem, suite: &TestSuite, k_end: usize, opts: &ConformanceOptions) -> Result<ConformanceReport, ReachError> {
    let views = suite.views(k_end, opts.sliding);
    let deviations: Vec<DMatrix<f64>> = views
        .par_iter()
        .map(|v| {
            let nominal = nominal_output(sys, &v.initial_state, &v.inputs)?;
            Ok(v.outputs.clone_owned() - nominal)
        })
        .collect::<Result<_, ReachError>>()?;
    let horizon = views.iter().map(|v| v.len()).max().unwrap_or(0);
    if horizon == 0 {
        return Ok(ConformanceReport { windows: views.len(), samples_checked: 0, max_margin: f64::NEG_INFINITY, violations: vec![], passed: true });
    }
    let tube = deviation_tube(sys, horizon - 1)?;

    let per_step: Vec<(usize, f64, Vec<Violation>)> = tube
        .par_iter()
        .enumerate()
        .map(|(k, z)| {
            let f = facets(z)?;
            let radius = z.half_widths().amax();
            let mut worst = f64::NEG_INFINITY;
            let mut count = 0;
            let mut bad = Vec::new();
            for (v, dev) in views.iter().zip(&deviations) {
                if k >= dev.ncols() {
                    continue;
                }
                let y = dev.column(k).into_owned();
                let threshold = opts.tol * (1.0 + radius.max(y.amax()));
                let m = margin(z, &f, &y, threshold);
                count += 1;
                worst = worst.max(m);
                if m > threshold || m.is_nan() {
                    bad.push(Violation { case: v.case, start: v.start, step: k, margin: m });
                }
            }
            Ok((count, worst, bad))
        })
        .collect::<Result<_, ReachError>>()?;

    let mut violations: Vec<Violation> = per_step.iter().flat_map(|s| s.2.iter().copied()).collect();
    violations.sort_by_key(|v| (v.case, v.start, v.step));
    Ok(ConformanceReport {
        windows: views.len(),
        samples_checked: per_step.iter().map(|s| s.0).sum(),
        max_margin: per_step.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max),
        passed: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use sysmodel::{TestCase, Timing};

    #[test]
    fn empty_suite_passes() {
        let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(1.0)).unwrap();
        let r = check_conformance(&sys, &TestSuite::new(1.0), 5, &Default::default()).unwrap();
        assert!(r.passed && r.samples_checked == 0);
    }

    #[test]
    fn displaced_sample_is_flagged() {
        let w = Zonotope::centered_box(DVector::zeros(1), &[0.1]).unwrap();
        let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0], Timing::Discrete(1.0))
            .unwrap()
            .with_disturbance(dmatrix![1.0], w)
            .unwrap();
        // Nominal output is zero; step 2 allows |y| ≤ 0.15.
        let case = TestCase::new(DMatrix::zeros(1, 3), dmatrix![0.0, 0.1, 0.2], DVector::zeros(1)).unwrap();
        let suite = TestSuite::from_cases(1.0, vec![case]).unwrap();
        let r = check_conformance(&sys, &suite, 2, &Default::default()).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].case, r.violations[0].step), (0, 2));
        assert!((r.violations[0].margin - 0.05).abs() < 1e-12);
    }
}
