use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use setlib::Interval;

use crate::LabError;

/// Joint-space dynamics at one configuration, diagonal inertia only:
/// `τᵢ = massᵢ·uᵢ + biasᵢ`, where the bias lumps Coriolis and gravity terms.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSample {
    pub mass: Vec<f64>,
    pub bias: Vec<f64>,
}

pub trait DynamicsSampler {
    fn joints(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng) -> DynamicsSample;
}

/// Stand-in for a rigid-body model: every joint's inertia varies uniformly in
/// `[mass_min, mass_max]` and its bias uniformly in `±bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDynamics {
    pub mass_min: Vec<f64>,
    pub mass_max: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SurrogateDynamics {
    /// Unit inertia, no bias: torque equals the commanded acceleration.
    pub fn unit(joints: usize) -> Self {
        Self { mass_min: vec![1.0; joints], mass_max: vec![1.0; joints], bias: vec![0.0; joints] }
    }
}

impl DynamicsSampler for SurrogateDynamics {
    fn joints(&self) -> usize {
        self.mass_min.len()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DynamicsSample {
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mass = self.mass_min.iter().zip(&self.mass_max).map(|(&lo, &hi)| draw(rng, lo, hi)).collect();
        let bias = self.bias.iter().map(|&b| draw(rng, -b.abs(), b.abs())).collect();
        DynamicsSample { mass, bias }
    }
}

/// Largest symmetric `U_p` per joint with `|massᵢ·u + biasᵢ| ≤ τ_maxᵢ` for
/// every `|u| ≤ U_p,ᵢ` at every sampled configuration.
pub fn fit_input_interval(tau_max: &[f64], sampler: &dyn DynamicsSampler, samples: usize, seed: u64) -> Result<Vec<Interval>, LabError> {
    if sampler.joints() != tau_max.len() {
        return Err(LabError::Config(format!("{} torque limits for {} joints", tau_max.len(), sampler.joints())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut limit = vec![f64::INFINITY; tau_max.len()];
    for _ in 0..samples.max(1) {
        let s = sampler.sample(&mut rng);
        for (i, l) in limit.iter_mut().enumerate() {
            if !(s.mass[i] > 0.0) {
                return Err(LabError::Config(format!("joint {} has non-positive inertia {}", i + 1, s.mass[i])));
            }
            *l = l.min((tau_max[i] - s.bias[i].abs()) / s.mass[i]);
        }
    }
    limit
        .iter()
        .enumerate()
        .map(|(i, &l)| if l > 0.0 { Ok(Interval::symmetric(&[l])?) } else { Err(LabError::InfeasibleTorque { joint: i + 1, tau_max: tau_max[i] }) })
        .collect()
}
