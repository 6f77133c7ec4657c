use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use setlib::PlanarHull;
use sysmodel::{nominal_output, LtiSystem, TestSuite};

use crate::IdentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowId {
    pub case: usize,
    pub start: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DataOptions {
    /// Start a window at every sample of cases that carry a state trace.
    pub sliding: bool,
    /// Keep every deviation, not only the per-step extreme points.
    pub keep_raw: bool,
}

/// Extreme points of the deviations at one step; labels index windows.
#[derive(Debug, Clone)]
enum StepPoints {
    Empty,
    Line { min: (f64, usize), max: (f64, usize) },
    Plane(PlanarHull),
    All(Vec<(DVector<f64>, usize)>),
}

impl StepPoints {
    fn new(q: usize) -> Self {
        match q {
            2 => StepPoints::Plane(PlanarHull::new()),
            1 => StepPoints::Empty,
            _ => StepPoints::All(Vec::new()),
        }
    }

    fn push(&mut self, y: &[f64], label: usize) {
        match self {
            StepPoints::Empty if y.len() == 1 => *self = StepPoints::Line { min: (y[0], label), max: (y[0], label) },
            StepPoints::Line { min, max } => {
                if y[0] < min.0 {
                    *min = (y[0], label);
                }
                if y[0] > max.0 {
                    *max = (y[0], label);
                }
            }
            StepPoints::Plane(h) => h.push([y[0], y[1]], label),
            StepPoints::All(v) => v.push((DVector::from_column_slice(y), label)),
            StepPoints::Empty => unreachable!("empty step holds only scalar data"),
        }
    }

    fn merge(&mut self, other: StepPoints) {
        match (self, other) {
            (_, StepPoints::Empty) => {}
            (me @ StepPoints::Empty, o) => *me = o,
            (StepPoints::Line { min, max }, StepPoints::Line { min: m2, max: x2 }) => {
                // Ties keep the lower label so the result does not depend on the split.
                if m2.0 < min.0 || (m2.0 == min.0 && m2.1 < min.1) {
                    *min = m2;
                }
                if x2.0 > max.0 || (x2.0 == max.0 && x2.1 < max.1) {
                    *max = x2;
                }
            }
            (StepPoints::Plane(h), StepPoints::Plane(h2)) => h.merge(h2),
            (StepPoints::All(v), StepPoints::All(v2)) => v.extend(v2),
            _ => unreachable!("steps of one data set share a dimension"),
        }
    }

    fn finish(&mut self) {
        match self {
            StepPoints::Plane(h) => h.flush(),
            StepPoints::All(v) => v.sort_by_key(|p| p.1),
            _ => {}
        }
    }
}

/// Output deviations `y_a = y − y*` of every window, reduced per step.
///
/// The reduction keeps exactly the points that can attain `max n·y_a` for
/// some direction `n`: the extremes in 1-D, the convex hull in 2-D and all
/// points above.
#[derive(Debug, Clone)]
pub struct DeviationData {
    pub k_end: usize,
    pub outputs: usize,
    pub sample_time: f64,
    pub windows: Vec<WindowId>,
    steps: Vec<StepPoints>,
    counts: Vec<usize>,
    raw: Option<Vec<DMatrix<f64>>>,
    max_abs: f64,
}

impl DeviationData {
    pub fn build(sys: &LtiSystem, suite: &TestSuite, k_end: usize, opts: &DataOptions) -> Result<Self, IdentError> {
        let q = sys.outputs();
        if let Some((m, qs, n)) = suite.dims() {
            if (m, qs, n) != (sys.inputs(), q, sys.order()) {
                return Err(IdentError::Invalid(format!(
                    "suite has (inputs, outputs, states) = ({m}, {qs}, {n}), model has ({}, {q}, {})",
                    sys.inputs(),
                    sys.order()
                )));
            }
        }
        let views = suite.views(k_end, opts.sliding);
        let windows: Vec<WindowId> = views.iter().map(|v| WindowId { case: v.case, start: v.start }).collect();
        let empty = || ((0..=k_end).map(|_| StepPoints::new(q)).collect::<Vec<_>>(), vec![0usize; k_end + 1], 0.0f64);

        let deviations: Vec<DMatrix<f64>> =
            views.par_iter().map(|v| Ok(v.outputs.clone_owned() - nominal_output(sys, &v.initial_state, &v.inputs)?)).collect::<Result<_, IdentError>>()?;
        let (mut steps, counts, max_abs) = deviations
            .par_iter()
            .enumerate()
            .fold(empty, |(mut steps, mut counts, mut max_abs), (label, dev)| {
                for (k, col) in dev.column_iter().enumerate() {
                    steps[k].push(col.as_slice(), label);
                    counts[k] += 1;
                    max_abs = max_abs.max(col.amax());
                }
                (steps, counts, max_abs)
            })
            .reduce(empty, |(mut s1, mut c1, m1), (s2, c2, m2)| {
                for (a, b) in s1.iter_mut().zip(s2) {
                    a.merge(b);
                }
                for (a, b) in c1.iter_mut().zip(c2) {
                    *a += b;
                }
                (s1, c1, m1.max(m2))
            });
        steps.iter_mut().for_each(StepPoints::finish);
        Ok(Self { k_end, outputs: q, sample_time: suite.sample_time, windows, steps, counts, raw: opts.keep_raw.then_some(deviations), max_abs })
    }

    /// Number of windows with a sample at step `k`.
    pub fn count(&self, k: usize) -> usize {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// `max_m n·y_a[k]` and the window attaining it; `None` without data.
    pub fn max_dot(&self, k: usize, n: &DVector<f64>) -> Option<(f64, usize)> {
        match &self.steps[k] {
            StepPoints::Empty => None,
            StepPoints::Line { min, max } => {
                let (a, b) = (n[0] * min.0, n[0] * max.0);
                Some(if b >= a { (b, max.1) } else { (a, min.1) })
            }
            StepPoints::Plane(h) => h.max_dot([n[0], n[1]]),
            StepPoints::All(v) => v.iter().map(|(p, l)| (n.dot(p), *l)).fold(None, |best, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            }),
        }
    }

    /// Points that attain every directional maximum at step `k`.
    pub fn extreme_points(&self, k: usize) -> Vec<(DVector<f64>, usize)> {
        match &self.steps[k] {
            StepPoints::Empty => vec![],
            StepPoints::Line { min, max } => {
                let mut v = vec![(DVector::from_element(1, min.0), min.1)];
                if max.1 != min.1 {
                    v.push((DVector::from_element(1, max.0), max.1));
                }
                v
            }
            StepPoints::Plane(h) => h.vertices().iter().map(|(p, l)| (DVector::from_column_slice(p), *l)).collect(),
            StepPoints::All(v) => v.clone(),
        }
    }

    /// Deviations of every window (`q × len`), when built with `keep_raw`.
    pub fn raw(&self) -> Option<&[DMatrix<f64>]> {
        self.raw.as_deref()
    }
}
