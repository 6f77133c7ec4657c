use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use optim::LinearProgram;
use serde::Serialize;
use setlib::constraint_normals;
use sysmodel::{disturbance_maps, LtiSystem};

use crate::{DeviationData, IdentError};

/// Variable order of the identification LP: `[c_W, c_V, α_W, α_V]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VariableLayout {
    pub nw: usize,
    pub nv: usize,
    pub gw: usize,
    pub gv: usize,
}

impl VariableLayout {
    pub fn of(sys: &LtiSystem) -> Self {
        Self { nw: sys.disturbance_dim(), nv: sys.error_dim(), gw: sys.w().num_generators(), gv: sys.v().num_generators() }
    }
    pub fn len(&self) -> usize {
        self.nw + self.nv + self.gw + self.gv
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn centers(&self) -> usize {
        self.nw + self.nv
    }
    pub fn scales(&self) -> usize {
        self.gw + self.gv
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpBuildOptions {
    /// One row per (window, step, direction) instead of the per-step maximum.
    /// Needs data built with `keep_raw`.
    pub aggregate: bool,
    /// Absolute slack for rows the noise cannot influence at all.
    pub zero_tol: f64,
}

impl Default for LpBuildOptions {
    fn default() -> Self {
        Self { aggregate: true, zero_tol: 1e-10 }
    }
}

/// A direction the noise cannot reach at some step, with the largest data
/// component along it (within tolerance, hence harmless).
#[derive(Debug, Clone, Serialize)]
pub struct ZeroRowCheck {
    pub step: usize,
    pub direction: Vec<f64>,
    pub max_component: f64,
}

#[derive(Debug, Clone)]
pub struct IdentLp {
    pub lp: LinearProgram,
    pub layout: VariableLayout,
    /// Distinct constraint directions (one per `±` pair).
    pub directions: usize,
    pub checks: Vec<ZeroRowCheck>,
}

struct Direction {
    n: DVector<f64>,
    birth: usize,
}

/// Canonical key of a unit direction up to sign, for de-duplication across steps.
fn key(n: &DVector<f64>) -> Vec<i64> {
    let lead = n.iter().find(|v| v.abs() > 1e-9).copied().unwrap_or(1.0);
    let s = if lead < 0.0 { -1.0 } else { 1.0 };
    n.iter().map(|v| (s * v * 1e9).round() as i64).collect()
}

/// Assembles the identification LP.
///
/// Cost: `t_s Σ_{k=0}^{K} 1ᵀ|R_a[k] generators| α`, i.e. the summed hull size
/// of the deviation tube. Rows: for every direction `n` that is a constraint
/// normal of the tube templates at some step `b` and every `k ≥ b` with data,
/// `max_m ±n·y_a[k] ≤ ±n·M_k c + S_k(±n) α`, where `M_k` maps the noise center
/// and `S_k(n)_j = Σ_blocks |n·(block template j)|`. A direction keeps
/// applying after its first step; any direction is a valid support constraint,
/// and the per-step normals alone already describe each set exactly.
pub fn build_ident_lp(sys: &LtiSystem, data: &DeviationData, opts: &LpBuildOptions) -> Result<IdentLp, IdentError> {
    let k_end = data.k_end;
    let q = sys.outputs();
    if data.outputs != q {
        return Err(IdentError::Invalid(format!("data has {} outputs, model has {q}", data.outputs)));
    }
    if !opts.aggregate && data.raw().is_none() {
        return Err(IdentError::Invalid("unaggregated rows need raw deviations".into()));
    }
    let layout = VariableLayout::of(sys);
    let noise = sys.noise_set();
    let t = noise.templates();
    let (nh, gh) = (layout.centers(), layout.scales());
    let maps = disturbance_maps(sys, k_end)?;
    let blocks: Vec<DMatrix<f64>> = maps.state_maps.iter().map(|e| e * t).collect();
    let out_block = &maps.output_map * t;
    let t_s = data.sample_time;

    // Cost: hull size of every tube set, summed over the horizon.
    let col_abs = |m: &DMatrix<f64>| DVector::from_fn(m.ncols(), |j, _| m.column(j).iter().map(|v| v.abs()).sum::<f64>());
    let mut gamma = col_abs(&out_block) * (k_end as f64 + 1.0);
    for (i, b) in blocks.iter().enumerate() {
        // Block i appears in every set from step i + 1 on.
        gamma += col_abs(b) * (k_end - i) as f64;
    }
    let mut cost = DVector::zeros(layout.len());
    cost.rows_mut(nh, gh).copy_from(&(gamma * t_s));

    // Constraint directions with their first step.
    let mut dirs: Vec<Direction> = Vec::new();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut templates = out_block.clone();
    for k in 0..=k_end {
        if k > 0 {
            let b = &blocks[k - 1];
            let mut grown = DMatrix::zeros(q, templates.ncols() + b.ncols());
            grown.columns_mut(0, templates.ncols()).copy_from(&templates);
            grown.columns_mut(templates.ncols(), b.ncols()).copy_from(b);
            templates = grown;
        }
        if data.count(k) == 0 {
            continue;
        }
        for n in constraint_normals(&templates)? {
            seen.entry(key(&n)).or_insert_with(|| {
                dirs.push(Direction { n, birth: k });
                dirs.len() - 1
            });
        }
    }

    let scale = 1.0 + data.max_abs();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut checks = Vec::new();
    for d in &dirs {
        let n = &d.n;
        // Running S_k(n) and n·M_k over k.
        let mut spread = out_block.tr_mul(n).abs();
        let mut center = (n.transpose() * &maps.output_map).transpose();
        for k in 0..=k_end {
            if k > 0 {
                spread += blocks[k - 1].tr_mul(n).abs();
                center += (n.transpose() * &maps.state_maps[k - 1]).transpose();
            }
            if k < d.birth || data.count(k) == 0 {
                continue;
            }
            let influence = spread.amax().max(center.amax());
            let samples: Vec<(f64, f64)> = if opts.aggregate {
                let up = data.max_dot(k, n).expect("step has data").0;
                let down = data.max_dot(k, &-n).expect("step has data").0;
                vec![(up, down)]
            } else {
                data.raw()
                    .expect("checked above")
                    .iter()
                    .filter(|dev| dev.ncols() > k)
                    .map(|dev| {
                        let v = n.dot(&dev.column(k));
                        (v, -v)
                    })
                    .collect()
            };
            if influence <= 1e-14 * scale {
                let worst = samples.iter().map(|s| s.0.max(s.1)).fold(f64::NEG_INFINITY, f64::max);
                if worst > opts.zero_tol * scale {
                    let up = data.max_dot(k, n).expect("step has data");
                    let down = data.max_dot(k, &-n).expect("step has data");
                    let w = data.windows[if up.0 >= down.0 { up.1 } else { down.1 }];
                    return Err(IdentError::Coverage { step: k, case: w.case, start: w.start, excess: worst });
                }
                checks.push(ZeroRowCheck { step: k, direction: n.iter().copied().collect(), max_component: worst });
                continue;
            }
            for (up, down) in samples {
                let mut a = vec![0.0; layout.len()];
                for j in 0..nh {
                    a[j] = -center[j];
                }
                for j in 0..gh {
                    a[nh + j] = -spread[j];
                }
                rows.push((a.clone(), -up));
                for j in 0..nh {
                    a[j] = center[j];
                }
                rows.push((a, -down));
            }
        }
    }
    let lp = LinearProgram::from_rows(cost, &rows)?
        .with_bounds(DVector::from_fn(layout.len(), |j, _| if j < nh { f64::NEG_INFINITY } else { 0.0 }), DVector::from_element(layout.len(), f64::INFINITY));
    Ok(IdentLp { lp, layout, directions: dirs.len(), checks })
}
