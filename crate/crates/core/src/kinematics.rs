//! Eversion growth, material bookkeeping and drum odometry.
//!
//! The outer wall of an everting sleeve stays put against the pipe while new
//! material turns inside-out at the tip. The inner strip (and whatever is tied
//! to its sealed end) is pulled through the center at twice the tip speed, so
//! a tail-mounted sensor sits at `2x - S` along the pipe for extension `x` and
//! sleeve length `S`. It enters the pipe once half the sleeve has everted.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::route::PipeRoute;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("extension {extension} m outside [0, {sleeve_length}] m")]
    ExtensionOutOfRange { extension: f64, sleeve_length: f64 },
    #[error("invalid robot profile: {0}")]
    InvalidProfile(String),
    #[error("invalid drum config: {0}")]
    InvalidDrum(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    Fabric,
    Plastic,
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Fabric => "fabric",
            Material::Plastic => "plastic",
        })
    }
}

impl FromStr for Material {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fabric" => Ok(Material::Fabric),
            "plastic" => Ok(Material::Plastic),
            other => Err(format!("unknown material `{other}` (fabric, plastic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotProfile {
    /// Total sleeve material length `S`, meters.
    pub sleeve_length: f64,
    /// Inflated tube diameter, meters.
    pub flat_diameter: f64,
    pub material: Material,
}

impl RobotProfile {
    pub fn new(sleeve_length: f64, flat_diameter: f64, material: Material) -> Result<Self, KinematicsError> {
        if !(sleeve_length > 0.0 && sleeve_length.is_finite()) {
            return Err(KinematicsError::InvalidProfile(format!(
                "sleeve_length must be positive (got {sleeve_length})"
            )));
        }
        if !(flat_diameter > 0.0 && flat_diameter.is_finite()) {
            return Err(KinematicsError::InvalidProfile(format!(
                "flat_diameter must be positive (got {flat_diameter})"
            )));
        }
        Ok(Self {
            sleeve_length,
            flat_diameter,
            material,
        })
    }

    /// Sewn rip-stop nylon sleeve, 5 m long and 60 mm across.
    pub fn fabric() -> Self {
        Self {
            sleeve_length: 5.0,
            flat_diameter: 0.060,
            material: Material::Fabric,
        }
    }

    /// Polythene lay-flat tubing one size below the pipe. Diameter and length
    /// are reconstructions.
    pub fn plastic() -> Self {
        Self {
            sleeve_length: 2.0,
            flat_diameter: 0.050,
            material: Material::Plastic,
        }
    }

    fn check(&self, extension: f64) -> Result<(), KinematicsError> {
        if extension >= 0.0 && extension <= self.sleeve_length {
            Ok(())
        } else {
            Err(KinematicsError::ExtensionOutOfRange {
                extension,
                sleeve_length: self.sleeve_length,
            })
        }
    }
}

/// Hand-cranked tendon drum with a shaft encoder. Single-layer winding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrumConfig {
    pub drum_radius: f64,
    pub ticks_per_rev: u32,
    /// Tendon payout per unit of tip extension.
    pub payout_ratio: f64,
}

impl Default for DrumConfig {
    fn default() -> Self {
        Self {
            drum_radius: 0.02,
            ticks_per_rev: 1024,
            payout_ratio: 2.0,
        }
    }
}

impl DrumConfig {
    pub fn new(drum_radius: f64, ticks_per_rev: u32, payout_ratio: f64) -> Result<Self, KinematicsError> {
        if !(drum_radius > 0.0 && drum_radius.is_finite()) {
            return Err(KinematicsError::InvalidDrum(format!(
                "drum_radius must be positive (got {drum_radius})"
            )));
        }
        if ticks_per_rev == 0 {
            return Err(KinematicsError::InvalidDrum("ticks_per_rev must be at least 1".into()));
        }
        if !(payout_ratio > 0.0 && payout_ratio.is_finite()) {
            return Err(KinematicsError::InvalidDrum(format!(
                "payout_ratio must be positive (got {payout_ratio})"
            )));
        }
        Ok(Self {
            drum_radius,
            ticks_per_rev,
            payout_ratio,
        })
    }

    /// Tip extension represented by a single encoder tick.
    pub fn extension_per_tick(&self) -> f64 {
        extension_from_ticks(self, 1)
    }

    /// Nearest tick count for a true extension (what the encoder would read).
    pub fn ticks_for_extension(&self, extension: f64) -> i64 {
        let ticks = extension * self.payout_ratio * f64::from(self.ticks_per_rev) / (2.0 * PI * self.drum_radius);
        ticks.round() as i64
    }
}

/// Tip extension inferred from encoder ticks. Negative ticks map to negative
/// extension; clamping is left to the caller.
pub fn extension_from_ticks(drum: &DrumConfig, ticks: i64) -> f64 {
    let payout = 2.0 * PI * drum.drum_radius * ticks as f64 / f64::from(drum.ticks_per_rev);
    payout / drum.payout_ratio
}

/// Arc position of the sealed (sensor) end. Negative while the sensor is still
/// outside the pipe entrance.
pub fn sensor_position(profile: &RobotProfile, extension: f64) -> Result<f64, KinematicsError> {
    profile.check(extension)?;
    Ok(2.0 * extension - profile.sleeve_length)
}

/// Split of the sleeve material at a given extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialBudget {
    /// Everted wall lying against the pipe.
    pub outer: f64,
    /// Inner strip inside the everted section.
    pub inner: f64,
    /// Material still outside the pipe entrance.
    pub tail: f64,
}

pub fn material_budget(profile: &RobotProfile, extension: f64) -> Result<MaterialBudget, KinematicsError> {
    profile.check(extension)?;
    let total = profile.sleeve_length;
    let outer = extension;
    let inner = extension.min(total - extension);
    let tail = (total - 2.0 * extension).max(0.0);
    Ok(MaterialBudget { outer, inner, tail })
}

/// Furthest the tip can get: limited by the sleeve or the end of the course.
pub fn max_extension(profile: &RobotProfile, route: &PipeRoute) -> f64 {
    profile.sleeve_length.min(route.total_length())
}

/// Snapshot of the robot at one encoder reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub extension: f64,
    pub encoder_ticks: i64,
    pub sensor_s: f64,
}

impl KinematicState {
    pub fn from_ticks(profile: &RobotProfile, drum: &DrumConfig, ticks: i64) -> Result<Self, KinematicsError> {
        let extension = extension_from_ticks(drum, ticks);
        let sensor_s = sensor_position(profile, extension)?;
        Ok(Self {
            extension,
            encoder_ticks: ticks,
            sensor_s,
        })
    }
}

/// Independent check of [`sensor_position`] by stepping discrete material
/// elements around the tip.
///
/// The sleeve is cut into `n_elements` equal pieces. Each step turns the
/// leading piece of the inner strip inside-out onto the pipe wall at the tip,
/// then re-attaches the remaining (inextensible) strip to the new tip. The
/// sealed end is the back of the last piece.
pub fn discrete_material_oracle(profile: &RobotProfile, extension: f64, n_elements: usize) -> f64 {
    assert!(n_elements >= 1, "need at least one element");
    let total = profile.sleeve_length;
    let h = total / n_elements as f64;
    // Front coordinate of every inner-strip piece relative to a shared
    // translation. Initially piece k trails the entrance by k pieces.
    let fronts: Vec<f64> = (0..n_elements).map(|k| -(k as f64) * h).collect();
    let mut shift = 0.0;
    let mut head = 0usize;
    let mut tip = 0.0;

    let target = extension.clamp(0.0, total);
    while head < n_elements && tip + h <= target + 1e-15 * total {
        // Piece `head` leaves the strip and lies on the wall over [tip, tip + h].
        tip += h;
        head += 1;
        if head < n_elements {
            // The strip's new leading piece must sit at the tip.
            shift = tip - fronts[head];
        }
    }
    if head == n_elements {
        return tip;
    }
    // Partial piece: evert the remaining fraction of the leading piece.
    let rem = target - tip;
    if rem > 0.0 {
        let lead = fronts[head] + shift;
        shift += (tip + rem) - (lead - rem);
    }
    fronts[n_elements - 1] + shift - h
}
