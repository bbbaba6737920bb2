//! Forward models for the tail-mounted sensor.
//!
//! Magnets stand in for radiation sources during bench tests, so two kernels
//! are provided: a scalar dipole far-field (`C / d³`) for the hall-effect
//! proxy and an attenuated point source (`A e^{-μd} / d²`) for a counter.
//! Readings superpose over all planted sources, then pass through either an
//! ADC (hall) or Poisson counting (counter).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::config::{ConfigError, Document, Section};
use crate::route::{PipeRoute, RouteError, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("invalid ADC range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("ADC bits must be in [1, 32] (got {0})")]
    InvalidBits(u32),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("invalid sensor config: {0}")]
    InvalidConfig(String),
    #[error("sensor arc position {0} beyond the route")]
    SensorOutOfRange(f64),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("sources config {0}")]
    Config(#[from] ConfigError),
}

/// Distance law used both to simulate readings and to invert them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldModel {
    MagneticDipole,
    GammaPoint,
}

impl fmt::Display for FieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldModel::MagneticDipole => "magnetic_dipole",
            FieldModel::GammaPoint => "gamma_point",
        })
    }
}

impl FromStr for FieldModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "magnetic_dipole" => Ok(FieldModel::MagneticDipole),
            "gamma_point" => Ok(FieldModel::GammaPoint),
            other => Err(format!("unknown source kind `{other}` (magnetic_dipole, gamma_point)")),
        }
    }
}

/// Default singularity guard: magnet and sensor have finite size.
pub const DEFAULT_DISTANCE_FLOOR: f64 = 1e-3;

impl FieldModel {
    /// Field per unit strength at `distance`. `mu` only affects gamma sources.
    pub fn kernel(self, distance: f64, mu: f64, floor: f64) -> f64 {
        let d = distance.max(floor);
        match self {
            FieldModel::MagneticDipole => 1.0 / (d * d * d),
            FieldModel::GammaPoint => (-mu * distance).exp() / (d * d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    /// Arc position along the route.
    pub s: f64,
    pub strength: f64,
    pub kind: FieldModel,
    /// Radial distance from the centerline; `None` puts it on the pipe wall.
    pub lateral_offset: Option<f64>,
}

impl Source {
    pub fn magnet(s: f64, strength: f64) -> Self {
        Self {
            s,
            strength,
            kind: FieldModel::MagneticDipole,
            lateral_offset: None,
        }
    }

    pub fn gamma(s: f64, activity: f64) -> Self {
        Self {
            kind: FieldModel::GammaPoint,
            ..Self::magnet(s, activity)
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.lateral_offset = Some(offset);
        self
    }

    pub fn validate(&self, route: &PipeRoute) -> Result<(), SensorError> {
        if !(self.strength > 0.0 && self.strength.is_finite()) {
            return Err(SensorError::InvalidSource(format!(
                "strength must be positive (got {})",
                self.strength
            )));
        }
        if !(self.s >= 0.0 && self.s <= route.total_length()) {
            return Err(SensorError::InvalidSource(format!(
                "s = {} outside route [0, {}]",
                self.s,
                route.total_length()
            )));
        }
        if let Some(off) = self.lateral_offset {
            if !(off >= 0.0 && off.is_finite()) {
                return Err(SensorError::InvalidSource(format!(
                    "lateral offset must be non-negative (got {off})"
                )));
            }
        }
        Ok(())
    }

    /// Location of the source itself: the centerline point at `s`, pushed out
    /// along the local normal by the lateral offset.
    pub fn wall_point(&self, route: &PipeRoute) -> Result<Vec3, SensorError> {
        let offset = match self.lateral_offset {
            Some(off) => off,
            None => route.bore_at(self.s)? / 2.0,
        };
        Ok(route.pose_at(self.s)?.offset(offset))
    }
}

/// Field contribution of one source at a given distance.
pub fn field_at(source: &Source, distance: f64, mu: f64, floor: f64) -> f64 {
    source.strength * source.kind.kernel(distance, mu, floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorKind {
    /// Hall-effect proxy: Gaussian noise then an ADC.
    Hall {
        sigma: f64,
        adc_bits: u32,
        adc_min: f64,
        adc_max: f64,
    },
    /// Radiation counter: Poisson counts over a dwell window.
    Counter { dwell_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub kind: SensorKind,
    pub baseline: f64,
    pub distance_floor: f64,
    /// Linear attenuation of the medium, per meter. Zero for magnets.
    pub mu: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            kind: SensorKind::Hall {
                sigma: 0.5,
                adc_bits: 12,
                adc_min: 0.0,
                adc_max: 200.0,
            },
            baseline: 50.0,
            distance_floor: DEFAULT_DISTANCE_FLOOR,
            mu: 0.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.distance_floor > 0.0 && self.distance_floor.is_finite()) {
            return Err(SensorError::InvalidConfig("distance_floor must be positive".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(SensorError::InvalidConfig("mu must be non-negative".into()));
        }
        if !self.baseline.is_finite() {
            return Err(SensorError::InvalidConfig("baseline must be finite".into()));
        }
        match self.kind {
            SensorKind::Hall {
                sigma,
                adc_bits,
                adc_min,
                adc_max,
            } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(SensorError::InvalidConfig("sigma must be non-negative".into()));
                }
                if !(1..=32).contains(&adc_bits) {
                    return Err(SensorError::InvalidBits(adc_bits));
                }
                if !(adc_min < adc_max) || !adc_min.is_finite() || !adc_max.is_finite() {
                    return Err(SensorError::InvalidRange {
                        min: adc_min,
                        max: adc_max,
                    });
                }
            }
            SensorKind::Counter { dwell_time } => {
                if !(dwell_time > 0.0 && dwell_time.is_finite()) {
                    return Err(SensorError::InvalidConfig("dwell_time must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Field model that matches this detector.
    pub fn field_model(&self) -> FieldModel {
        match self.kind {
            SensorKind::Hall { .. } => FieldModel::MagneticDipole,
            SensorKind::Counter { .. } => FieldModel::GammaPoint,
        }
    }

    /// Maps a raw ADC code or count back into reading units.
    pub fn decode(&self, raw: f64) -> f64 {
        match self.kind {
            SensorKind::Hall {
                adc_bits,
                adc_min,
                adc_max,
                ..
            } => adc_min + raw / full_scale(adc_bits) * (adc_max - adc_min),
            SensorKind::Counter { dwell_time } => raw / dwell_time,
        }
    }

    fn from_section(sec: &Section) -> Result<Self, SensorError> {
        sec.expect_keys(&[
            "kind",
            "baseline",
            "sigma",
            "adc_bits",
            "adc_min",
            "adc_max",
            "dwell_s",
            "distance_floor_m",
            "mu_per_m",
        ])?;
        let kind: String = sec.require("kind")?;
        let defaults = SensorConfig::default();
        let kind = match kind.as_str() {
            "hall" => {
                for key in ["dwell_s"] {
                    if sec.entry(key).is_some() {
                        return Err(ConfigError::new(sec.line_of(key), "`dwell_s` applies to counters").into());
                    }
                }
                SensorKind::Hall {
                    sigma: sec.get_f64("sigma")?.unwrap_or(0.0),
                    adc_bits: sec.get("adc_bits")?.unwrap_or(12),
                    adc_min: sec.require_f64("adc_min")?,
                    adc_max: sec.require_f64("adc_max")?,
                }
            }
            "counter" => {
                for key in ["sigma", "adc_bits", "adc_min", "adc_max"] {
                    if sec.entry(key).is_some() {
                        return Err(
                            ConfigError::new(sec.line_of(key), format!("`{key}` applies to hall sensors")).into(),
                        );
                    }
                }
                SensorKind::Counter {
                    dwell_time: sec.require_f64("dwell_s")?,
                }
            }
            other => {
                return Err(ConfigError::new(
                    sec.line_of("kind"),
                    format!("unknown sensor kind `{other}` (hall, counter)"),
                )
                .into())
            }
        };
        let cfg = SensorConfig {
            kind,
            baseline: sec.get_f64("baseline")?.unwrap_or(0.0),
            distance_floor: sec.get_f64("distance_floor_m")?.unwrap_or(defaults.distance_floor),
            mu: sec.get_f64("mu_per_m")?.unwrap_or(0.0),
        };
        cfg.validate().map_err(|e| ConfigError::new(sec.line, e.to_string()))?;
        Ok(cfg)
    }
}

fn full_scale(bits: u32) -> f64 {
    ((1u64 << bits) - 1) as f64
}

/// ADC model: clamp into `[min, max]`, scale onto `[0, 2^bits - 1]` and round
/// half away from zero.
pub fn quantize(value: f64, bits: u32, min: f64, max: f64) -> Result<u32, SensorError> {
    if !(1..=32).contains(&bits) {
        return Err(SensorError::InvalidBits(bits));
    }
    if !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(SensorError::InvalidRange { min, max });
    }
    let top = full_scale(bits);
    let clamped = if value.is_nan() { min } else { value.clamp(min, max) };
    let code = ((clamped - min) / (max - min) * top).round();
    Ok(code.clamp(0.0, top) as u32)
}

/// Everything needed to synthesize readings along one course.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub route: PipeRoute,
    pub sources: Vec<Source>,
    pub sensor: SensorConfig,
}

impl Scene {
    pub fn new(route: PipeRoute, sources: Vec<Source>, sensor: SensorConfig) -> Result<Self, SensorError> {
        sensor.validate()?;
        for src in &sources {
            src.validate(&route)?;
        }
        Ok(Self { route, sources, sensor })
    }

    /// Sensor location in space. Before entering the pipe the sensor lies on
    /// the entry line behind the entrance.
    pub fn sensor_point(&self, sensor_s: f64) -> Result<Vec3, SensorError> {
        if !(sensor_s <= self.route.total_length()) {
            return Err(SensorError::SensorOutOfRange(sensor_s));
        }
        Ok(self.route.pose_extended(sensor_s).position)
    }

    /// Noise-free, unquantized reading: baseline plus every source's field.
    pub fn expected_reading(&self, sensor_s: f64) -> Result<f64, SensorError> {
        let p = self.sensor_point(sensor_s)?;
        let mut total = self.sensor.baseline;
        for src in &self.sources {
            let d = (src.wall_point(&self.route)? - p).norm();
            total += field_at(src, d, self.sensor.mu, self.sensor.distance_floor);
        }
        Ok(total)
    }

    /// One raw detector sample: an ADC code for hall sensors, a count for
    /// counters.
    pub fn reading<R: Rng + ?Sized>(&self, sensor_s: f64, rng: &mut R) -> Result<i64, SensorError> {
        let mean = self.expected_reading(sensor_s)?;
        match self.sensor.kind {
            SensorKind::Hall {
                sigma,
                adc_bits,
                adc_min,
                adc_max,
            } => {
                let noise = if sigma > 0.0 {
                    Normal::new(0.0, sigma)
                        .map_err(|e| SensorError::InvalidConfig(e.to_string()))?
                        .sample(rng)
                } else {
                    0.0
                };
                Ok(i64::from(quantize(mean + noise, adc_bits, adc_min, adc_max)?))
            }
            SensorKind::Counter { dwell_time } => Ok(poisson_count(dwell_time * mean.max(0.0), rng)),
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> i64 {
    if lambda <= 0.0 {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(dist) => dist.sample(rng) as i64,
        Err(_) => lambda.round() as i64,
    }
}

/// Parsed sources file: the `[sensor]` section plus every `[source]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcesConfig {
    pub sensor: SensorConfig,
    pub sources: Vec<Source>,
}

impl SourcesConfig {
    pub fn from_config(text: &str) -> Result<Self, SensorError> {
        let doc = Document::parse(text)?;
        doc.expect_sections(&["sensor", "source"])?;
        let sensor = match doc.unique("sensor")? {
            Some(sec) => SensorConfig::from_section(sec)?,
            None => SensorConfig::default(),
        };
        let mut sources = Vec::new();
        for sec in doc.sections_named("source") {
            sec.expect_keys(&["s_m", "strength", "kind", "lateral_offset_m"])?;
            let kind = sec.get::<FieldModel>("kind")?.unwrap_or(sensor.field_model());
            let src = Source {
                s: sec.require_f64("s_m")?,
                strength: sec.require_f64("strength")?,
                kind,
                lateral_offset: sec.get_f64("lateral_offset_m")?,
            };
            if !(src.strength > 0.0) {
                return Err(ConfigError::new(sec.line_of("strength"), "strength must be positive").into());
            }
            if !(src.s >= 0.0) {
                return Err(ConfigError::new(sec.line_of("s_m"), "s_m must be non-negative").into());
            }
            if src.lateral_offset.is_some_and(|o| o < 0.0) {
                return Err(
                    ConfigError::new(sec.line_of("lateral_offset_m"), "lateral_offset_m must be non-negative").into(),
                );
            }
            sources.push(src);
        }
        Ok(Self { sensor, sources })
    }
}
