//! Pipe courses as arc-length parameterized centerlines.
//!
//! A route is an ordered chain of straight runs, bends and constrictions with
//! no branching. Sharp bends are mitered joints of zero arc length; swept bends
//! are circular arcs. Each segment carries a moving frame (tangent, normal,
//! binormal) so that wall-mounted sources can be placed off the centerline.

use std::fmt;

use nalgebra::{Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::config::{ConfigError, Document};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("route has no segments")]
    Empty,
    #[error("segment {index}: bore must be positive (got {bore})")]
    NonPositiveBore { index: usize, bore: f64 },
    #[error("segment {index}: {field} must be finite and non-negative (got {value})")]
    InvalidDimension {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("route has zero total length")]
    ZeroLength,
    #[error("entry tangent must be a finite non-zero vector")]
    InvalidEntry,
    #[error("arc position {s} outside route [0, {total}]")]
    OutOfRange { s: f64, total: f64 },
    #[error("route config {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Straight,
    Bend,
    Constriction,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::Straight => "straight",
            SegmentKind::Bend => "bend",
            SegmentKind::Constriction => "constriction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BendStyle {
    Sharp,
    Swept,
}

/// One piece of pipe. Lengths and bores in meters, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Run length for straights and constrictions; ignored for bends.
    pub length: f64,
    /// Inner diameter.
    pub bore: f64,
    /// Zero means a sharp (mitered) joint.
    pub bend_radius: f64,
    pub bend_angle_deg: f64,
    /// Rotation of the turn direction about the incoming tangent. Zero turns
    /// toward the frame normal, 180 turns the opposite way.
    pub roll_deg: f64,
}

impl Segment {
    pub fn straight(length: f64, bore: f64) -> Self {
        Self {
            kind: SegmentKind::Straight,
            length,
            bore,
            bend_radius: 0.0,
            bend_angle_deg: 0.0,
            roll_deg: 0.0,
        }
    }

    pub fn constriction(length: f64, bore: f64) -> Self {
        Self {
            kind: SegmentKind::Constriction,
            ..Self::straight(length, bore)
        }
    }

    pub fn sharp_bend(angle_deg: f64, bore: f64) -> Self {
        Self::swept_bend(0.0, angle_deg, bore)
    }

    pub fn swept_bend(radius: f64, angle_deg: f64, bore: f64) -> Self {
        Self {
            kind: SegmentKind::Bend,
            length: 0.0,
            bore,
            bend_radius: radius,
            bend_angle_deg: angle_deg,
            roll_deg: 0.0,
        }
    }

    pub fn with_roll(mut self, roll_deg: f64) -> Self {
        self.roll_deg = roll_deg;
        self
    }

    pub fn bend_style(&self) -> Option<BendStyle> {
        match self.kind {
            SegmentKind::Bend if self.bend_radius == 0.0 => Some(BendStyle::Sharp),
            SegmentKind::Bend => Some(BendStyle::Swept),
            _ => None,
        }
    }

    pub fn arc_length(&self) -> f64 {
        match self.kind {
            SegmentKind::Bend => self.bend_radius * self.bend_angle_deg.to_radians(),
            _ => self.length,
        }
    }

    fn validate(&self, index: usize) -> Result<(), RouteError> {
        if !(self.bore > 0.0) || !self.bore.is_finite() {
            return Err(RouteError::NonPositiveBore { index, bore: self.bore });
        }
        let checks: [(&'static str, f64); 3] = [
            ("length", self.length),
            ("bend_radius", self.bend_radius),
            ("bend_angle", self.bend_angle_deg),
        ];
        for (field, value) in checks {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(RouteError::InvalidDimension { index, field, value });
            }
        }
        if self.bend_angle_deg > 180.0 {
            return Err(RouteError::InvalidDimension {
                index,
                field: "bend_angle",
                value: self.bend_angle_deg,
            });
        }
        if !self.roll_deg.is_finite() {
            return Err(RouteError::InvalidDimension {
                index,
                field: "roll",
                value: self.roll_deg,
            });
        }
        Ok(())
    }
}

/// Position and orthonormal frame at a point on the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub tangent: Vec3,
    /// Unit vector perpendicular to the tangent; wall sources sit along it.
    pub normal: Vec3,
}

impl Pose {
    /// Builds an entry pose, picking a normal perpendicular to `tangent`
    /// (for a +x tangent the normal is +y).
    pub fn new(position: Vec3, tangent: Vec3) -> Result<Self, RouteError> {
        let norm = tangent.norm();
        if !(norm > 0.0) || !norm.is_finite() || !position.iter().all(|c| c.is_finite()) {
            return Err(RouteError::InvalidEntry);
        }
        let t = tangent / norm;
        let mut n = Vec3::z().cross(&t);
        if n.norm() < 1e-9 {
            n = Vec3::y().cross(&t);
        }
        Ok(Self {
            position,
            tangent: t,
            normal: n.normalize(),
        })
    }

    pub fn binormal(&self) -> Vec3 {
        self.tangent.cross(&self.normal)
    }

    /// Point displaced from the centerline toward the wall along the normal.
    pub fn offset(&self, distance: f64) -> Vec3 {
        self.position + self.normal * distance
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            tangent: Vec3::x(),
            normal: Vec3::y(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureKind {
    SharpBend { angle_deg: f64 },
    SweptBend { radius: f64, angle_deg: f64 },
    Constriction { bore: f64, length: f64 },
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::SharpBend { angle_deg } => write!(f, "sharp bend {angle_deg}°"),
            FeatureKind::SweptBend { radius, angle_deg } => {
                write!(f, "swept bend {angle_deg}° (r = {radius} m)")
            }
            FeatureKind::Constriction { bore, length } => {
                write!(f, "constriction {bore} m bore over {length} m")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    /// Arc length at which the feature starts.
    pub s: f64,
    pub kind: FeatureKind,
    pub segment: usize,
}

/// Immutable pipe course. Cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeRoute {
    segments: Vec<Segment>,
    entry: Pose,
    starts: Vec<f64>,
    frames: Vec<Pose>,
    exit: Pose,
    total: f64,
}

impl PipeRoute {
    pub fn new(segments: Vec<Segment>, entry: Pose) -> Result<Self, RouteError> {
        if segments.is_empty() {
            return Err(RouteError::Empty);
        }
        for (i, seg) in segments.iter().enumerate() {
            seg.validate(i)?;
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut frames = Vec::with_capacity(segments.len());
        let mut s = 0.0;
        let mut frame = entry;
        for seg in &segments {
            starts.push(s);
            frames.push(frame);
            frame = advance(&frame, seg, seg.arc_length());
            s += seg.arc_length();
        }
        if !(s > 0.0) {
            return Err(RouteError::ZeroLength);
        }
        Ok(Self {
            segments,
            entry,
            starts,
            frames,
            exit: frame,
            total: s,
        })
    }

    /// Parses a route config: one `[segment]` section per piece, in order.
    ///
    /// Bends may omit `bore_m` and inherit the bore of the previous segment.
    pub fn from_config(text: &str) -> Result<Self, RouteError> {
        let doc = Document::parse(text)?;
        doc.expect_sections(&["segment"])?;
        let mut segments: Vec<Segment> = Vec::new();
        let mut last_line = 1;
        for sec in doc.sections_named("segment") {
            last_line = sec.line;
            sec.expect_keys(&[
                "kind",
                "length_m",
                "bore_m",
                "bend_radius_m",
                "bend_angle_deg",
                "roll_deg",
            ])?;
            let kind: String = sec.require("kind")?;
            let seg = match kind.as_str() {
                "straight" | "constriction" => {
                    for key in ["bend_radius_m", "bend_angle_deg", "roll_deg"] {
                        if sec.entry(key).is_some() {
                            return Err(
                                ConfigError::new(sec.line_of(key), format!("`{key}` only applies to bends")).into(),
                            );
                        }
                    }
                    let length = sec.require_f64("length_m")?;
                    let bore = sec.require_f64("bore_m")?;
                    if kind == "straight" {
                        Segment::straight(length, bore)
                    } else {
                        Segment::constriction(length, bore)
                    }
                }
                "bend" => {
                    if sec.entry("length_m").is_some() {
                        return Err(ConfigError::new(
                            sec.line_of("length_m"),
                            "bends take `bend_radius_m` and `bend_angle_deg`, not `length_m`",
                        )
                        .into());
                    }
                    let bore = match sec.get_f64("bore_m")? {
                        Some(b) => b,
                        None => segments
                            .last()
                            .map(|s| s.bore)
                            .ok_or_else(|| ConfigError::new(sec.line, "first segment must give `bore_m`"))?,
                    };
                    let radius = sec.get_f64("bend_radius_m")?.unwrap_or(0.0);
                    let angle = sec.require_f64("bend_angle_deg")?;
                    let roll = sec.get_f64("roll_deg")?.unwrap_or(0.0);
                    Segment::swept_bend(radius, angle, bore).with_roll(roll)
                }
                other => {
                    return Err(ConfigError::new(
                        sec.line_of("kind"),
                        format!("unknown segment kind `{other}` (straight, bend, constriction)"),
                    )
                    .into())
                }
            };
            seg.validate(segments.len())
                .map_err(|e| ConfigError::new(sec.line, e.to_string()))?;
            segments.push(seg);
        }
        if segments.is_empty() {
            return Err(ConfigError::new(last_line, "no [segment] sections").into());
        }
        Self::new(segments, Pose::default()).map_err(|e| match e {
            RouteError::ZeroLength => RouteError::Config(ConfigError::new(last_line, "route has zero total length")),
            other => other,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn entry_pose(&self) -> Pose {
        self.entry
    }

    pub fn exit_pose(&self) -> Pose {
        self.exit
    }

    /// Start arc length of each segment.
    pub fn cumulative_s(&self) -> &[f64] {
        &self.starts
    }

    pub fn total_length(&self) -> f64 {
        self.total
    }

    fn check_range(&self, s: f64) -> Result<(), RouteError> {
        if s >= 0.0 && s <= self.total {
            Ok(())
        } else {
            Err(RouteError::OutOfRange { s, total: self.total })
        }
    }

    /// Index of the last segment starting at or before `s`; at joints this is
    /// the downstream segment.
    fn segment_index(&self, s: f64) -> usize {
        self.starts.partition_point(|&start| start <= s).saturating_sub(1)
    }

    pub fn pose_at(&self, s: f64) -> Result<Pose, RouteError> {
        self.check_range(s)?;
        Ok(self.pose_extended(s))
    }

    /// Like [`pose_at`](Self::pose_at) but extrapolates along the entry and exit
    /// tangents outside `[0, total]`. A tail-mounted sensor that has not yet
    /// entered the pipe sits on the entry line at negative `s`.
    pub fn pose_extended(&self, s: f64) -> Pose {
        if s < 0.0 {
            let e = self.entry;
            return Pose {
                position: e.position + e.tangent * s,
                ..e
            };
        }
        if s >= self.total {
            let x = self.exit;
            return Pose {
                position: x.position + x.tangent * (s - self.total),
                ..x
            };
        }
        let i = self.segment_index(s);
        let seg = &self.segments[i];
        let local = (s - self.starts[i]).clamp(0.0, seg.arc_length());
        if seg.bend_style() == Some(BendStyle::Sharp) {
            // A zero-length joint: report the downstream frame.
            return advance(&self.frames[i], seg, 0.0);
        }
        advance(&self.frames[i], seg, local)
    }

    pub fn bore_at(&self, s: f64) -> Result<f64, RouteError> {
        self.check_range(s)?;
        // Zero-length joints occupy no pipe; use the nearest segment with extent.
        let i = self.segment_index(s);
        let has_extent = |j: &usize| self.segments[*j].arc_length() > 0.0;
        let j = (0..=i)
            .rev()
            .filter(has_extent)
            .find(|&j| s <= self.starts[j] + self.segments[j].arc_length())
            .or_else(|| (i..self.segments.len()).find(has_extent))
            .unwrap_or(i);
        Ok(self.segments[j].bore)
    }

    /// Bends and constrictions in order of increasing start arc length.
    pub fn features(&self) -> Vec<Feature> {
        self.segments
            .iter()
            .enumerate()
            .filter_map(|(i, seg)| {
                let kind = match (seg.kind, seg.bend_style()) {
                    (SegmentKind::Bend, Some(BendStyle::Sharp)) => FeatureKind::SharpBend {
                        angle_deg: seg.bend_angle_deg,
                    },
                    (SegmentKind::Bend, _) => FeatureKind::SweptBend {
                        radius: seg.bend_radius,
                        angle_deg: seg.bend_angle_deg,
                    },
                    (SegmentKind::Constriction, _) => FeatureKind::Constriction {
                        bore: seg.bore,
                        length: seg.length,
                    },
                    (SegmentKind::Straight, _) => return None,
                };
                Some(Feature {
                    s: self.starts[i],
                    kind,
                    segment: i,
                })
            })
            .collect()
    }
}

/// Frame after travelling `u` meters into `seg` from `start`.
fn advance(start: &Pose, seg: &Segment, u: f64) -> Pose {
    match seg.kind {
        SegmentKind::Straight | SegmentKind::Constriction => Pose {
            position: start.position + start.tangent * u,
            ..*start
        },
        SegmentKind::Bend => {
            let roll = seg.roll_deg.to_radians();
            let dir = start.normal * roll.cos() + start.binormal() * roll.sin();
            let (phi, position) = if seg.bend_radius == 0.0 {
                (seg.bend_angle_deg.to_radians(), start.position)
            } else {
                let r = seg.bend_radius;
                let phi = u / r;
                let p = start.position + start.tangent * (r * phi.sin()) + dir * (r * (1.0 - phi.cos()));
                (phi, p)
            };
            if phi == 0.0 {
                return Pose { position, ..*start };
            }
            let axis = Unit::new_normalize(start.tangent.cross(&dir));
            let rot = Rotation3::from_axis_angle(&axis, phi);
            Pose {
                position,
                tangent: (rot * start.tangent).normalize(),
                normal: (rot * start.normal).normalize(),
            }
        }
    }
}

/// The reconstructed tabletop course: sharp 45° bend, a 40 mm constriction in
/// 55 mm pipe, and a swept 90° bend. Lengths are illustrative.
pub fn reference_course() -> PipeRoute {
    PipeRoute::new(
        vec![
            Segment::straight(0.5, 0.055),
            Segment::sharp_bend(45.0, 0.055),
            Segment::straight(0.4, 0.055),
            Segment::constriction(0.1, 0.040),
            Segment::straight(0.4, 0.055),
            Segment::swept_bend(0.15, 90.0, 0.055),
            Segment::straight(0.5, 0.055),
        ],
        Pose::default(),
    )
    .expect("reference course is valid")
}
