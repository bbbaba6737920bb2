//! Synthetic survey runs: crank the drum, log encoder ticks and detector codes.
//!
//! The tip follows a piecewise-linear extension schedule. At every sample the
//! encoder reports the nearest tick to the true extension and the detector is
//! read at the true sensor position, so the logged ticks carry the same
//! quantization a real shaft encoder would.
//!
//! Randomness comes from one 64-bit seed. Each consumer draws from its own
//! ChaCha stream of that seed, so adding a consumer never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acquisition::{Sample, Trace, TraceError};
use crate::feasibility::{can_traverse, Blocker, FeasibilityError, MaterialRules};
use crate::kinematics::{max_extension, sensor_position, DrumConfig, KinematicsError, RobotProfile};
use crate::sensor::{Scene, SensorError};

/// Tip speed used when nothing else is configured, m/s.
pub const DEFAULT_CRANK_SPEED: f64 = 0.05;
pub const DEFAULT_SAMPLE_RATE: f64 = 200.0;
/// Above this two samples could round to the same millisecond.
pub const MAX_SAMPLE_RATE: f64 = 1000.0;

/// Stream of the seed that feeds detector noise.
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("sample rate must be in (0, {MAX_SAMPLE_RATE}] Hz (got {0})")]
    SampleRate(f64),
    #[error("crank speed must be positive and finite (got {0})")]
    CrankSpeed(f64),
    #[error("schedule leg target must be finite and non-negative (got {0})")]
    LegTarget(f64),
    #[error("schedule has no legs")]
    EmptySchedule,
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Drive the tip toward `target` extension at `speed`. Targets beyond the
/// reachable extension are clamped to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub target: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrankSchedule {
    pub legs: Vec<Leg>,
}

impl CrankSchedule {
    /// Extend from the entrance to full reach at a constant tip speed.
    pub fn constant(speed: f64) -> Self {
        Self {
            legs: vec![Leg {
                target: f64::MAX,
                speed,
            }],
        }
    }

    /// Extend to full reach, then reel the tendon back in to `back_to`.
    pub fn extend_retract(speed: f64, back_to: f64) -> Self {
        Self {
            legs: vec![
                Leg {
                    target: f64::MAX,
                    speed,
                },
                Leg { target: back_to, speed },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.legs.is_empty() {
            return Err(SimError::EmptySchedule);
        }
        for leg in &self.legs {
            if !(leg.speed > 0.0 && leg.speed.is_finite()) {
                return Err(SimError::CrankSpeed(leg.speed));
            }
            if !(leg.target >= 0.0) {
                return Err(SimError::LegTarget(leg.target));
            }
        }
        Ok(())
    }

    /// Breakpoints `(time_s, extension)` with targets clamped to `reach`.
    pub fn knots(&self, reach: f64) -> Vec<(f64, f64)> {
        let mut knots = vec![(0.0, 0.0)];
        let (mut t, mut x) = (0.0, 0.0);
        for leg in &self.legs {
            let target = leg.target.min(reach);
            let dt = (target - x).abs() / leg.speed;
            if dt > 0.0 {
                t += dt;
                x = target;
                knots.push((t, x));
            }
        }
        knots
    }
}

/// Extension at time `t` on a piecewise-linear schedule.
pub fn extension_at(knots: &[(f64, f64)], t: f64) -> f64 {
    let i = knots.partition_point(|&(tk, _)| tk <= t);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[i - 1].1;
    }
    let (t0, x0) = knots[i - 1];
    let (t1, x1) = knots[i];
    x0 + (x1 - x0) * (t - t0) / (t1 - t0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub sample_rate_hz: f64,
    pub schedule: CrankSchedule,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            schedule: CrankSchedule::constant(DEFAULT_CRANK_SPEED),
            seed: 0,
        }
    }
}

/// Identifiers recorded in the trace header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunIds {
    pub robot: String,
    pub drum: String,
    pub route: String,
    pub sources: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub trace: Trace,
    /// Furthest extension the tip reached.
    pub reach: f64,
    pub blocker: Option<Blocker>,
}

pub fn simulate(
    scene: &Scene,
    robot: &RobotProfile,
    drum: &DrumConfig,
    rules: &MaterialRules,
    params: &SimParams,
    ids: &RunIds,
) -> Result<SimOutcome, SimError> {
    let rate = params.sample_rate_hz;
    if !(rate > 0.0 && rate <= MAX_SAMPLE_RATE) {
        return Err(SimError::SampleRate(rate));
    }
    params.schedule.validate()?;
    let verdict = can_traverse(robot, rules, &scene.route)?;
    let mut reach = max_extension(robot, &scene.route);
    if let Some(b) = &verdict.blocker {
        reach = reach.min(b.s);
    }

    let mut trace = Trace::new();
    for (key, value) in [
        ("robot", ids.robot.as_str()),
        ("drum", ids.drum.as_str()),
        ("route", ids.route.as_str()),
        ("sources", ids.sources.as_str()),
    ] {
        if !value.is_empty() {
            trace.set_meta(key, value)?;
        }
    }
    trace.set_meta("seed", params.seed.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(NOISE_STREAM);
    let knots = params.schedule.knots(reach);
    let duration = knots.last().map_or(0.0, |k| k.0);
    let n = (duration * rate + 1e-9).floor() as u64 + 1;
    for k in 0..n {
        let t = k as f64 / rate;
        let x = extension_at(&knots, t);
        let s = sensor_position(robot, x)?;
        let raw = scene.reading(s, &mut rng)?;
        let t_ms = (k as f64 * 1000.0 / rate).round() as u64;
        trace.push(Sample::new(t_ms, drum.ticks_for_extension(x), raw))?;
    }
    Ok(SimOutcome {
        trace,
        reach,
        blocker: verdict.blocker,
    })
}
