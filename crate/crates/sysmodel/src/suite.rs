use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::SysError;

/// One recorded experiment: inputs and outputs as columns per step, plus the
/// initial state in model coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub inputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub initial_state: DVector<f64>,
    /// Model state at every step (one column per step). Present when every
    /// sample may start a new window.
    pub state_trace: Option<DMatrix<f64>>,
}

impl TestCase {
    pub fn new(inputs: DMatrix<f64>, outputs: DMatrix<f64>, initial_state: DVector<f64>) -> Result<Self, SysError> {
        if inputs.ncols() != outputs.ncols() {
            return Err(SysError::Invalid(format!("test case has {} input samples but {} output samples", inputs.ncols(), outputs.ncols())));
        }
        Ok(Self { inputs, outputs, initial_state, state_trace: None })
    }

    pub fn with_state_trace(mut self, trace: DMatrix<f64>) -> Result<Self, SysError> {
        if trace.ncols() != self.len() || trace.nrows() != self.initial_state.len() {
            return Err(SysError::Invalid("state trace must have one model-state column per step".into()));
        }
        self.state_trace = Some(trace);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A window into a test case: the samples from `start`, at most `k_end + 1` of them.
#[derive(Debug, Clone)]
pub struct CaseView<'a> {
    pub case: usize,
    pub start: usize,
    pub inputs: DMatrixView<'a, f64>,
    pub outputs: DMatrixView<'a, f64>,
    pub initial_state: DVector<f64>,
}

impl CaseView<'_> {
    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub sample_time: f64,
    cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(sample_time: f64) -> Self {
        Self { sample_time, cases: Vec::new() }
    }

    pub fn from_cases(sample_time: f64, cases: Vec<TestCase>) -> Result<Self, SysError> {
        let mut s = Self::new(sample_time);
        for c in cases {
            s.push(c)?;
        }
        Ok(s)
    }

    /// Appends a case whose dimensions match the existing ones.
    pub fn push(&mut self, case: TestCase) -> Result<(), SysError> {
        if let Some(first) = self.cases.first() {
            if first.inputs.nrows() != case.inputs.nrows()
                || first.outputs.nrows() != case.outputs.nrows()
                || first.initial_state.len() != case.initial_state.len()
            {
                return Err(SysError::Invalid("test case dimensions differ from the suite".into()));
            }
        }
        self.cases.push(case);
        Ok(())
    }

    pub fn extend(&mut self, other: TestSuite) -> Result<(), SysError> {
        if !self.cases.is_empty() && !other.cases.is_empty() && (self.sample_time - other.sample_time).abs() > 1e-12 {
            return Err(SysError::Invalid("suites have different sample times".into()));
        }
        if self.cases.is_empty() {
            self.sample_time = other.sample_time;
        }
        for c in other.cases {
            self.push(c)?;
        }
        Ok(())
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// `(inputs, outputs, state)` dimensions, if any case exists.
    pub fn dims(&self) -> Option<(usize, usize, usize)> {
        self.cases.first().map(|c| (c.inputs.nrows(), c.outputs.nrows(), c.initial_state.len()))
    }

    /// Windows of at most `k_end + 1` samples. With `sliding`, cases that
    /// carry a state trace yield a window from every sample; other cases
    /// yield only their window from step 0.
    pub fn views(&self, k_end: usize, sliding: bool) -> Vec<CaseView<'_>> {
        let mut out = Vec::new();
        for (ci, case) in self.cases.iter().enumerate() {
            let n = case.len();
            let starts: Vec<usize> = match (&case.state_trace, sliding) {
                (Some(_), true) => (0..n).collect(),
                _ if n > 0 => vec![0],
                _ => vec![],
            };
            for s in starts {
                let len = (k_end + 1).min(n - s);
                let x0 = match (&case.state_trace, s) {
                    (_, 0) => case.initial_state.clone(),
                    (Some(t), _) => t.column(s).into_owned(),
                    (None, _) => unreachable!("windows past step 0 need a trace"),
                };
                out.push(CaseView { case: ci, start: s, inputs: case.inputs.columns(s, len), outputs: case.outputs.columns(s, len), initial_state: x0 });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(n: usize) -> TestCase {
        let u = DMatrix::from_fn(1, n, |_, k| k as f64);
        let y = DMatrix::from_fn(1, n, |_, k| 2.0 * k as f64);
        TestCase::new(u, y, DVector::zeros(1)).unwrap()
    }

    #[test]
    fn sliding_windows_start_at_every_sample() {
        let trace = DMatrix::from_fn(1, 5, |_, k| k as f64 * 10.0);
        let c = case(5).with_state_trace(trace).unwrap();
        let suite = TestSuite::from_cases(0.1, vec![c, case(3)]).unwrap();
        let views = suite.views(2, true);
        assert_eq!(views.len(), 6);
        assert_eq!(views[1].start, 1);
        assert_eq!(views[1].initial_state[0], 10.0);
        assert_eq!(views[1].inputs[(0, 0)], 1.0);
        assert_eq!(views[3].len(), 2);
        assert_eq!(views[4].len(), 1);
        assert_eq!(suite.views(2, false).len(), 2);
    }

    #[test]
    fn mismatched_case_is_rejected() {
        let mut s = TestSuite::new(0.1);
        s.push(case(3)).unwrap();
        let bad = TestCase::new(DMatrix::zeros(2, 3), DMatrix::zeros(1, 3), DVector::zeros(1)).unwrap();
        assert!(s.push(bad).is_err());
        assert!(TestCase::new(DMatrix::zeros(1, 3), DMatrix::zeros(1, 2), DVector::zeros(1)).is_err());
    }
}
