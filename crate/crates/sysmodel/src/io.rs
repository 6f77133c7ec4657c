//! File formats.
//!
//! * Model JSON: `A, B, C, D, E, F` as row-major nested arrays, optional `EV`,
//!   `W` and `V` as zonotope objects, and `timing` (`"continuous"` or
//!   `{"discrete": dt}`).
//! * Test suites: a directory holding `suite.json` (sample time and case
//!   names), one `<case>.csv` per case with header `k,u_1..u_m,y_1..y_q`, and
//!   a `<case>.x0.json` sidecar with the initial state and optional state trace.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setlib::matrix_io::{from_columns, from_rows, to_columns, to_rows};
use setlib::Zonotope;

use crate::{LtiSystem, SysError, TestCase, TestSuite, Timing};

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "EV", default, skip_serializing_if = "Option::is_none")]
    ev: Option<Vec<Vec<f64>>>,
    #[serde(rename = "W")]
    w: Zonotope,
    #[serde(rename = "V")]
    v: Zonotope,
    timing: Timing,
}

impl Serialize for LtiSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelJson {
            a: to_rows(self.a()),
            b: to_rows(self.b()),
            c: to_rows(self.c()),
            d: to_rows(self.d()),
            e: to_rows(self.e()),
            f: to_rows(self.f()),
            ev: (self.ev().amax() > 0.0).then(|| to_rows(self.ev())),
            w: self.w().clone(),
            v: self.v().clone(),
            timing: self.timing(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LtiSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        model_from_json(j).map_err(serde::de::Error::custom)
    }
}

fn model_from_json(j: ModelJson) -> Result<LtiSystem, SysError> {
    let n = j.a.len();
    let q = j.c.len();
    let m = j.d.first().map(Vec::len).or_else(|| j.b.first().map(Vec::len)).unwrap_or(0);
    let (nw, nv) = (j.w.dim(), j.v.dim());
    let mat = |name: &'static str, rows: &[Vec<f64>], r: usize, c: usize| -> Result<DMatrix<f64>, SysError> {
        // Matrices without rows cannot carry their width; accept `[]`.
        if r == 0 {
            return Ok(DMatrix::zeros(0, c));
        }
        let m = from_rows(rows, Some(c)).map_err(|e| SysError::Invalid(format!("{name}: {e}")))?;
        if m.nrows() != r {
            return Err(SysError::Shape { name, expected: (r, c), found: m.shape() });
        }
        Ok(m)
    };
    let sys = LtiSystem::new(mat("A", &j.a, n, n)?, mat("B", &j.b, n, m)?, mat("C", &j.c, q, n)?, mat("D", &j.d, q, m)?, j.timing)?
        .with_disturbance(mat("E", &j.e, n, nw)?, j.w)?
        .with_measurement_error(mat("F", &j.f, q, nv)?, j.v)?;
    match j.ev {
        Some(ev) => sys.with_error_to_state(mat("EV", &ev, n, nv)?),
        None => Ok(sys),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SysError + '_ {
    move |source| SysError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl ToString) -> SysError {
    SysError::Format { path: path.display().to_string(), message: message.to_string() }
}

pub fn read_model(path: &Path) -> Result<LtiSystem, SysError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn write_model(path: &Path, sys: &LtiSystem) -> Result<(), SysError> {
    let text = serde_json::to_string_pretty(sys).map_err(|e| format_err(path, e))?;
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Serialize, Deserialize)]
struct SuiteManifest {
    sample_time: f64,
    inputs: usize,
    outputs: usize,
    cases: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct InitialStateJson {
    x0: Vec<f64>,
    /// One inner array per step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_trace: Option<Vec<Vec<f64>>>,
}

/// Writes one CSV trace with header `k,u_1..u_m,y_1..y_q`.
pub fn write_trace(path: &Path, case: &TestCase) -> Result<(), SysError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
    let (m, q) = (case.inputs.nrows(), case.outputs.nrows());
    let mut header = vec!["k".to_string()];
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=q).map(|i| format!("y_{i}")));
    w.write_record(&header).map_err(|e| format_err(path, e))?;
    for k in 0..case.len() {
        let mut rec = vec![k.to_string()];
        rec.extend(case.inputs.column(k).iter().map(|v| format!("{v:?}")));
        rec.extend(case.outputs.column(k).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV trace; returns `(inputs, outputs)` with one column per step.
pub fn read_trace(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>), SysError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let header = r.headers().map_err(|e| format_err(path, e))?.clone();
    if header.get(0) != Some("k") {
        return Err(format_err(path, "first column must be k"));
    }
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    let q = header.iter().filter(|h| h.starts_with("y_")).count();
    if m + q + 1 != header.len() {
        return Err(format_err(path, "columns must be k, u_*, y_*"));
    }
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e))?;
        let vals: Vec<f64> = rec.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format_err(path, format!("row {row}: {e}")))?;
        if vals.len() != header.len() {
            return Err(format_err(path, format!("row {row} has {} fields", vals.len())));
        }
        if vals[0] as usize != row {
            return Err(format_err(path, format!("row {row} has step index {}", vals[0])));
        }
        u.extend_from_slice(&vals[1..=m]);
        y.extend_from_slice(&vals[m + 1..]);
    }
    let steps = u.len().checked_div(m).or(y.len().checked_div(q)).unwrap_or(0);
    Ok((DMatrix::from_column_slice(m, steps, &u), DMatrix::from_column_slice(q, steps, &y)))
}

pub fn write_suite(dir: &Path, suite: &TestSuite) -> Result<(), SysError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (m, q, _) = suite.dims().unwrap_or((0, 0, 0));
    let names: Vec<String> = (0..suite.len()).map(|i| format!("case_{i:04}")).collect();
    for (name, case) in names.iter().zip(suite.cases()) {
        write_trace(&dir.join(format!("{name}.csv")), case)?;
        let side = InitialStateJson { x0: case.initial_state.iter().copied().collect(), state_trace: case.state_trace.as_ref().map(to_columns) };
        let path = dir.join(format!("{name}.x0.json"));
        fs::write(&path, serde_json::to_string(&side).map_err(|e| format_err(&path, e))?).map_err(io_err(&path))?;
    }
    let manifest = SuiteManifest { sample_time: suite.sample_time, inputs: m, outputs: q, cases: names };
    let path = dir.join("suite.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(|e| format_err(&path, e))?).map_err(io_err(&path))
}

pub fn read_suite(dir: &Path) -> Result<TestSuite, SysError> {
    let path = dir.join("suite.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: SuiteManifest = serde_json::from_str(&text).map_err(|e| format_err(&path, e))?;
    let mut suite = TestSuite::new(manifest.sample_time);
    for name in &manifest.cases {
        let csv_path = dir.join(format!("{name}.csv"));
        let (u, y) = read_trace(&csv_path)?;
        if u.nrows() != manifest.inputs || y.nrows() != manifest.outputs {
            return Err(format_err(&csv_path, "dimensions differ from suite.json"));
        }
        let side_path = dir.join(format!("{name}.x0.json"));
        let text = fs::read_to_string(&side_path).map_err(io_err(&side_path))?;
        let side: InitialStateJson = serde_json::from_str(&text).map_err(|e| format_err(&side_path, e))?;
        let n = side.x0.len();
        let mut case = TestCase::new(u, y, DVector::from_vec(side.x0))?;
        if let Some(trace) = side.state_trace {
            let t = from_columns(&trace, n).map_err(|e| format_err(&side_path, e))?;
            case = case.with_state_trace(t)?;
        }
        suite.push(case)?;
    }
    Ok(suite)
}
