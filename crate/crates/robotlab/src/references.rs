use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ReferenceConfig;

/// Sampled desired trajectory; `acceleration[k]` is held over step `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

impl Reference {
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }
}

/// Rest-to-rest motion over a whole number of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Constant acceleration for `accel_steps`, coast for `coast_steps`,
    /// then the mirrored deceleration. Switching times lie on the grid, so
    /// held-acceleration integration is exact.
    Trapezoid {
        start: f64,
        distance: f64,
        accel: f64,
        accel_steps: usize,
        coast_steps: usize,
    },
    /// Quintic blend from `start` to `start + distance` with zero end
    /// velocity and acceleration.
    Quintic {
        start: f64,
        distance: f64,
        steps: usize,
    },
    Dwell {
        position: f64,
        steps: usize,
    },
}

impl Segment {
    /// Trapezoid covering `distance` within the caps, with phase lengths
    /// rounded up to whole samples and the peak values rescaled to match.
    pub fn trapezoid(start: f64, distance: f64, max_velocity: f64, max_acceleration: f64, dt: f64) -> Self {
        let d = distance.abs();
        if d == 0.0 {
            return Segment::Dwell { position: start, steps: 0 };
        }
        let (t_acc, t_coast) = if d * max_acceleration <= max_velocity * max_velocity {
            ((d / max_acceleration).sqrt(), 0.0)
        } else {
            (max_velocity / max_acceleration, d / max_velocity - max_velocity / max_acceleration)
        };
        let accel_steps = ((t_acc / dt) - 1e-9).ceil().max(1.0) as usize;
        let coast_steps = ((t_coast / dt) - 1e-9).ceil().max(0.0) as usize;
        let (ta, tc) = (accel_steps as f64 * dt, coast_steps as f64 * dt);
        let accel = distance / (ta * (ta + tc));
        Segment::Trapezoid { start, distance, accel, accel_steps, coast_steps }
    }

    /// Shortest quintic on the grid within the caps (peak acceleration
    /// `10/√3·d/T²`, peak velocity `15/8·d/T`).
    pub fn quintic(start: f64, distance: f64, max_velocity: f64, max_acceleration: f64, dt: f64) -> Self {
        let d = distance.abs();
        let t = (10.0 / 3f64.sqrt() * d / max_acceleration).sqrt().max(15.0 / 8.0 * d / max_velocity);
        let steps = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
        Segment::Quintic { start, distance, steps }
    }

    pub fn steps(&self) -> usize {
        match *self {
            Segment::Trapezoid { accel_steps, coast_steps, .. } => 2 * accel_steps + coast_steps,
            Segment::Quintic { steps, .. } | Segment::Dwell { steps, .. } => steps,
        }
    }

    pub fn end(&self) -> f64 {
        match *self {
            Segment::Trapezoid { start, distance, .. } | Segment::Quintic { start, distance, .. } => start + distance,
            Segment::Dwell { position, .. } => position,
        }
    }

    /// `(q, q̇, q̈)` at local sample `i`, closed form.
    pub fn sample(&self, i: usize, dt: f64) -> (f64, f64, f64) {
        match *self {
            Segment::Trapezoid { start, accel, accel_steps, coast_steps, .. } => {
                let t = i as f64 * dt;
                let ta = accel_steps as f64 * dt;
                let tc = coast_steps as f64 * dt;
                if i < accel_steps {
                    (start + 0.5 * accel * t * t, accel * t, accel)
                } else if i < accel_steps + coast_steps {
                    let v = accel * ta;
                    (start + 0.5 * accel * ta * ta + v * (t - ta), v, 0.0)
                } else {
                    let s = t - ta - tc;
                    let v = accel * ta;
                    (start + 0.5 * accel * ta * ta + v * tc + v * s - 0.5 * accel * s * s, v - accel * s, -accel)
                }
            }
            Segment::Quintic { start, distance, steps } => {
                let tt = steps as f64 * dt;
                let s = i as f64 / steps as f64;
                let pos = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
                let vel = (30.0 * s.powi(2) - 60.0 * s.powi(3) + 30.0 * s.powi(4)) / tt;
                let acc = (60.0 * s - 180.0 * s.powi(2) + 120.0 * s.powi(3)) / (tt * tt);
                (start + distance * pos, distance * vel, distance * acc)
            }
            Segment::Dwell { position, .. } => (position, 0.0, 0.0),
        }
    }
}

/// Random sequence of trapezoidal and quintic moves between random targets,
/// separated by short rests, truncated to the requested duration.
pub fn gen_segments(rng: &mut impl Rng, cfg: &ReferenceConfig, dt: f64) -> Vec<Segment> {
    let total = (cfg.duration / dt).round() as usize;
    let mut out = Vec::new();
    let (mut covered, mut at) = (0, 0.0);
    while covered < total {
        let distance = cfg.max_step * rng.gen_range(-1.0..=1.0);
        // Random peak velocity and acceleration, at least a fifth of the caps.
        let v = cfg.max_velocity * rng.gen_range(0.2..=1.0);
        let a = cfg.max_acceleration * rng.gen_range(0.2..=1.0);
        let motion = if rng.gen_bool(0.5) { Segment::trapezoid(at, distance, v, a, dt) } else { Segment::quintic(at, distance, v, a, dt) };
        at = motion.end();
        covered += motion.steps();
        out.push(motion);
        let dwell = (cfg.max_dwell * rng.gen_range(0.0..=1.0) / dt).round() as usize;
        if dwell > 0 {
            covered += dwell;
            out.push(Segment::Dwell { position: at, steps: dwell });
        }
    }
    out
}

/// Samples segments back to back into one trajectory of `steps` samples.
pub fn render(segments: &[Segment], steps: usize, dt: f64) -> Reference {
    let mut r = Reference { position: Vec::with_capacity(steps), velocity: Vec::with_capacity(steps), acceleration: Vec::with_capacity(steps) };
    'outer: for seg in segments {
        for i in 0..seg.steps() {
            if r.len() == steps {
                break 'outer;
            }
            let (q, v, a) = seg.sample(i, dt);
            r.position.push(q);
            r.velocity.push(v);
            r.acceleration.push(a);
        }
    }
    r
}

/// `cfg.count` trajectories of `cfg.duration` seconds each; trajectory `i`
/// depends only on `(seed, i)`.
pub fn gen_references(seed: u64, cfg: &ReferenceConfig, dt: f64) -> Vec<Reference> {
    let steps = (cfg.duration / dt).round() as usize;
    if steps == 0 {
        return Vec::new();
    }
    (0..cfg.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            render(&gen_segments(&mut rng, cfg, dt), steps, dt)
        })
        .collect()
}
