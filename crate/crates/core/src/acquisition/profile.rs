//! Reading-versus-arc-length profiles binned from raw traces.
//!
//! Arc position comes from encoder ticks only; timestamps never enter the
//! binning. Samples taken while the sensor is still outside the pipe are
//! dropped, and by default so are samples taken while the drum is winding the
//! robot back in, since the sleeve buckles during retraction.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::trace::{Sample, Trace};
use crate::kinematics::{extension_from_ticks, sensor_position, DrumConfig, RobotProfile};
use crate::sensor::SensorConfig;

pub const DEFAULT_BIN_WIDTH: f64 = 0.01;
pub const PROFILE_HEADER: &str = "s_center_m,mean_reading,n,phase";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("bin width must be positive and finite (got {0})")]
    InvalidBinWidth(f64),
    #[error("no in-pipe samples: the sensor never entered the pipe")]
    NoInPipeSamples,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Extend,
    Retract,
    Mixed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Extend => "extend",
            Phase::Retract => "retract",
            Phase::Mixed => "mixed",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "extend" => Ok(Phase::Extend),
            "retract" => Ok(Phase::Retract),
            "mixed" => Ok(Phase::Mixed),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub s_center: f64,
    pub mean_reading: f64,
    pub n: usize,
    pub phase: Phase,
}

/// Bins sit on the grid `(i + 1/2) * bin_width`; bins with no samples are
/// omitted, so consecutive centers differ by a whole number of bin widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub bin_width: f64,
    pub bins: Vec<Bin>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub bin_width: f64,
    pub include_retract: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            bin_width: DEFAULT_BIN_WIDTH,
            include_retract: false,
        }
    }
}

/// Number of samples looked at when deciding the drum direction.
pub const PHASE_WINDOW: usize = 3;

/// Per-sample motion phase. A sample is `Extend` when its tick count is no
/// lower than the one `PHASE_WINDOW - 1` samples earlier; ties count as
/// extension so a single jittery tick does not flip the phase.
pub fn sample_phases(samples: &[Sample]) -> Vec<Phase> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let back = samples[i.saturating_sub(PHASE_WINDOW - 1)].encoder_ticks;
            if s.encoder_ticks >= back {
                Phase::Extend
            } else {
                Phase::Retract
            }
        })
        .collect()
}

/// Grid index of the bin holding arc position `s`.
pub fn bin_index(s: f64, bin_width: f64) -> i64 {
    (s / bin_width).floor() as i64
}

pub fn bin_center(index: i64, bin_width: f64) -> f64 {
    (index as f64 + 0.5) * bin_width
}

#[derive(Default)]
struct Acc {
    sum: f64,
    n: usize,
    extend: usize,
    retract: usize,
}

pub fn build_profile(
    trace: &Trace,
    drum: &DrumConfig,
    robot: &RobotProfile,
    opts: &ProfileOptions,
) -> Result<Profile, ProfileError> {
    let w = opts.bin_width;
    if !(w > 0.0 && w.is_finite()) {
        return Err(ProfileError::InvalidBinWidth(w));
    }
    let phases = sample_phases(trace.samples());
    let mut bins: BTreeMap<i64, Acc> = BTreeMap::new();
    for (sample, phase) in trace.samples().iter().zip(phases) {
        if phase == Phase::Retract && !opts.include_retract {
            continue;
        }
        let extension = extension_from_ticks(drum, sample.encoder_ticks).clamp(0.0, robot.sleeve_length);
        let sensor_s = match sensor_position(robot, extension) {
            Ok(s) if s >= 0.0 => s,
            _ => continue,
        };
        let acc = bins.entry(bin_index(sensor_s, w)).or_default();
        acc.sum += sample.sensor_raw as f64;
        acc.n += 1;
        match phase {
            Phase::Retract => acc.retract += 1,
            _ => acc.extend += 1,
        }
    }
    if bins.is_empty() {
        return Err(ProfileError::NoInPipeSamples);
    }
    let bins = bins
        .into_iter()
        .map(|(i, acc)| Bin {
            s_center: bin_center(i, w),
            mean_reading: acc.sum / acc.n as f64,
            n: acc.n,
            phase: match (acc.extend, acc.retract) {
                (_, 0) => Phase::Extend,
                (0, _) => Phase::Retract,
                _ => Phase::Mixed,
            },
        })
        .collect();
    Ok(Profile { bin_width: w, bins })
}

impl Profile {
    /// Profile over explicit `(s, reading)` points, one sample per bin.
    pub fn from_points(bin_width: f64, points: &[(f64, f64)]) -> Self {
        Self {
            bin_width,
            bins: points
                .iter()
                .map(|&(s, r)| Bin {
                    s_center: s,
                    mean_reading: r,
                    n: 1,
                    phase: Phase::Extend,
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.s_center).collect()
    }

    pub fn readings(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.mean_reading).collect()
    }

    /// `(first, last)` bin center.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.bins.first()?.s_center, self.bins.last()?.s_center))
    }

    pub fn total_samples(&self) -> usize {
        self.bins.iter().map(|b| b.n).sum()
    }

    pub fn map_readings(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            bin_width: self.bin_width,
            bins: self
                .bins
                .iter()
                .map(|b| Bin {
                    mean_reading: f(b.mean_reading),
                    ..*b
                })
                .collect(),
        }
    }

    /// Converts raw ADC codes or counts into reading units. The decoding is
    /// affine, so the mean of decoded samples equals the decoded mean.
    pub fn decoded(&self, sensor: &SensorConfig) -> Self {
        self.map_readings(|raw| sensor.decode(raw))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# bin_width_m={}", crate::report::sig9(self.bin_width));
        out.push_str(PROFILE_HEADER);
        out.push('\n');
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                crate::report::sig9(b.s_center),
                crate::report::sig9(b.mean_reading),
                b.n,
                b.phase
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, ProfileError> {
        let err = |line: usize, message: String| ProfileError::Parse { line, message };
        let mut bin_width = None;
        let mut bins = Vec::new();
        let mut header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if let Some(rest) = raw.strip_prefix("# ") {
                if let Some(v) = rest.strip_prefix("bin_width_m=") {
                    bin_width = Some(v.parse::<f64>().map_err(|e| err(line, format!("bin_width_m: {e}")))?);
                }
                continue;
            }
            if !header {
                if raw != PROFILE_HEADER {
                    return Err(err(line, format!("expected header `{PROFILE_HEADER}`")));
                }
                header = true;
                continue;
            }
            let f: Vec<&str> = raw.split(',').collect();
            if f.len() != 4 {
                return Err(err(line, format!("expected 4 fields, found {}", f.len())));
            }
            let num = |i: usize| {
                f[i].parse::<f64>()
                    .map_err(|e| err(line, format!("field {}: {e}", i + 1)))
            };
            bins.push(Bin {
                s_center: num(0)?,
                mean_reading: num(1)?,
                n: f[2].parse().map_err(|e| err(line, format!("n: {e}")))?,
                phase: f[3].parse().map_err(|e| err(line, e))?,
            });
        }
        if !header {
            return Err(err(1, format!("missing header `{PROFILE_HEADER}`")));
        }
        let bin_width = bin_width.ok_or_else(|| err(1, "missing `# bin_width_m=` line".into()))?;
        if !(bin_width > 0.0) {
            return Err(ProfileError::InvalidBinWidth(bin_width));
        }
        Ok(Self { bin_width, bins })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Material;

    fn drum() -> DrumConfig {
        DrumConfig::default()
    }

    fn robot(s: f64) -> RobotProfile {
        RobotProfile::new(s, 0.05, Material::Plastic).unwrap()
    }

    fn trace_from_ticks(ticks: &[i64]) -> Trace {
        let mut t = Trace::new();
        for (i, &k) in ticks.iter().enumerate() {
            t.push(Sample::new(i as u64 * 10, k, 100 + i as i64)).unwrap();
        }
        t
    }

    fn ticks_for(x: f64) -> i64 {
        drum().ticks_for_extension(x)
    }

    #[test]
    fn monotone_ticks_all_extend() {
        let ticks: Vec<i64> = (0..500).map(|i| ticks_for(1.0 + i as f64 * 0.002)).collect();
        let p = build_profile(
            &trace_from_ticks(&ticks),
            &drum(),
            &robot(2.0),
            &ProfileOptions::default(),
        )
        .unwrap();
        assert!(p.bins.iter().all(|b| b.phase == Phase::Extend));
        assert!(sample_phases(trace_from_ticks(&ticks).samples())
            .iter()
            .all(|&p| p == Phase::Extend));
    }

    #[test]
    fn lead_in_samples_dropped() {
        // S = 5 and the tip stops at 2.6 m: the sensor reaches 0.2 m at most.
        let ticks: Vec<i64> = (0..=2600).map(|i| ticks_for(i as f64 * 0.001)).collect();
        let p = build_profile(
            &trace_from_ticks(&ticks),
            &drum(),
            &robot(5.0),
            &ProfileOptions::default(),
        )
        .unwrap();
        let (lo, hi) = p.span().unwrap();
        assert!((0.0..0.01).contains(&lo));
        assert!(hi <= 0.2 + 0.01, "{hi}");
        assert!(hi > 0.18);
    }

    #[test]
    fn never_in_pipe_is_distinct_error() {
        let ticks: Vec<i64> = (0..100).map(|i| ticks_for(i as f64 * 0.01)).collect();
        let err = build_profile(
            &trace_from_ticks(&ticks),
            &drum(),
            &robot(5.0),
            &ProfileOptions::default(),
        );
        assert_eq!(err, Err(ProfileError::NoInPipeSamples));
        assert_eq!(
            build_profile(
                &trace_from_ticks(&ticks),
                &drum(),
                &robot(5.0),
                &ProfileOptions {
                    bin_width: 0.0,
                    include_retract: false
                }
            ),
            Err(ProfileError::InvalidBinWidth(0.0))
        );
    }

    #[test]
    fn triangle_excludes_retraction_by_default() {
        let up: Vec<i64> = (0..=200).map(|i| ticks_for(1.2 + i as f64 * 0.002)).collect();
        let mut ticks = up.clone();
        ticks.extend(up.iter().rev().skip(1));
        let trace = trace_from_ticks(&ticks);
        let phases = sample_phases(trace.samples());
        let n_extend = phases.iter().filter(|&&p| p == Phase::Extend).count();
        // The first descending sample still sees a non-negative net change.
        assert_eq!(n_extend, up.len() + 1);
        let r = robot(2.0);
        let only = build_profile(&trace, &drum(), &r, &ProfileOptions::default()).unwrap();
        let in_pipe_up = up
            .iter()
            .filter(|&&k| 2.0 * extension_from_ticks(&drum(), k) - 2.0 >= 0.0)
            .count();
        assert!(only.total_samples() == in_pipe_up || only.total_samples() == in_pipe_up + 1);
        let all = build_profile(
            &trace,
            &drum(),
            &r,
            &ProfileOptions {
                include_retract: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(all.total_samples() > only.total_samples());
        assert!(all.bins.iter().any(|b| b.phase == Phase::Mixed));
    }

    #[test]
    fn time_rescaling_is_irrelevant() {
        let ticks: Vec<i64> = (0..400).map(|i| ticks_for(1.0 + i as f64 * 0.0025)).collect();
        let a = trace_from_ticks(&ticks);
        let mut b = Trace::new();
        for s in a.samples() {
            b.push(Sample::new(s.t_ms * 7 + 3, s.encoder_ticks, s.sensor_raw))
                .unwrap();
        }
        let opts = ProfileOptions::default();
        assert_eq!(
            build_profile(&a, &drum(), &robot(2.0), &opts).unwrap(),
            build_profile(&b, &drum(), &robot(2.0), &opts).unwrap()
        );
    }

    #[test]
    fn profile_csv_round_trip() {
        let p = Profile {
            bin_width: 0.01,
            bins: vec![
                Bin {
                    s_center: 0.005,
                    mean_reading: 51.25,
                    n: 10,
                    phase: Phase::Extend,
                },
                Bin {
                    s_center: 0.015,
                    mean_reading: 1.0 / 3.0,
                    n: 3,
                    phase: Phase::Mixed,
                },
            ],
        };
        let text = p.to_csv();
        let back = Profile::parse_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
        assert_eq!(back.bins[0], p.bins[0]);
        assert!(Profile::parse_csv("s,x\n").is_err());
    }
}
