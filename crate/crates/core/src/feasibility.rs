//! Can this robot get through this course?
//!
//! Bench outcomes: the sewn fabric sleeve stalled at the sharp 45° bends,
//! while the plastic lay-flat sleeve passed every course, including swept 90°
//! bends and 40 mm constrictions in 55 mm pipe. Those pass/fail observations
//! are encoded as per-material thresholds on sharp-bend angle and on the ratio
//! of bore to robot diameter. Swept bends never block.

use std::fmt;

use thiserror::Error;

use crate::config::{ConfigError, Document};
use crate::kinematics::{DrumConfig, Material, RobotProfile};
use crate::route::{BendStyle, PipeRoute, SegmentKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("rules are for {rules} but the robot is {robot}")]
    MaterialMismatch { robot: Material, rules: Material },
    #[error("invalid rules: {0}")]
    InvalidRules(String),
    #[error("robot config {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRules {
    pub material: Material,
    /// Largest sharp bend the sleeve can evert around, degrees.
    pub max_sharp_bend_deg: f64,
    /// Smallest bore / robot-diameter ratio it can squeeze through.
    pub min_bore_ratio: f64,
    pub notes: String,
}

impl MaterialRules {
    pub fn defaults(material: Material) -> Self {
        match material {
            Material::Fabric => Self {
                material,
                max_sharp_bend_deg: 30.0,
                min_bore_ratio: 0.6,
                notes: "stalled at sharp 45° bends; seam leaks and stiff sealed seams".into(),
            },
            Material::Plastic => Self {
                material,
                max_sharp_bend_deg: 90.0,
                min_bore_ratio: 0.7,
                notes: "passed every course, including 40 mm constrictions".into(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), FeasibilityError> {
        if !(self.min_bore_ratio > 0.0 && self.min_bore_ratio.is_finite()) {
            return Err(FeasibilityError::InvalidRules(format!(
                "min_bore_ratio must be positive (got {})",
                self.min_bore_ratio
            )));
        }
        if !(0.0..=180.0).contains(&self.max_sharp_bend_deg) {
            return Err(FeasibilityError::InvalidRules(format!(
                "max_sharp_bend_deg must be in [0, 180] (got {})",
                self.max_sharp_bend_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockReason {
    SharpBend { angle_deg: f64, limit_deg: f64 },
    Bore { bore: f64, ratio: f64, min_ratio: f64 },
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockReason::SharpBend { angle_deg, limit_deg } => {
                write!(f, "sharp-bend: {angle_deg}° exceeds the {limit_deg}° limit")
            }
            BlockReason::Bore { bore, ratio, min_ratio } => write!(
                f,
                "bore: {bore} m gives bore/diameter {ratio:.3}, below the {min_ratio} limit"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blocker {
    /// Start arc length of the blocking segment.
    pub s: f64,
    pub segment: usize,
    pub kind: SegmentKind,
    pub reason: BlockReason,
}

impl fmt::Display for Blocker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "blocked at s = {} m (segment {}, {}): {}",
            self.s, self.segment, self.kind, self.reason
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub feasible: bool,
    pub blocker: Option<Blocker>,
}

/// Walks the route from the entrance and reports the first segment the robot
/// cannot pass.
pub fn can_traverse(
    robot: &RobotProfile,
    rules: &MaterialRules,
    route: &PipeRoute,
) -> Result<Verdict, FeasibilityError> {
    if robot.material != rules.material {
        return Err(FeasibilityError::MaterialMismatch {
            robot: robot.material,
            rules: rules.material,
        });
    }
    rules.validate()?;
    for (i, (seg, &s)) in route.segments().iter().zip(route.cumulative_s()).enumerate() {
        let mut reason = None;
        if seg.bend_style() == Some(BendStyle::Sharp) && seg.bend_angle_deg > rules.max_sharp_bend_deg {
            reason = Some(BlockReason::SharpBend {
                angle_deg: seg.bend_angle_deg,
                limit_deg: rules.max_sharp_bend_deg,
            });
        }
        let ratio = seg.bore / robot.flat_diameter;
        if reason.is_none() && ratio < rules.min_bore_ratio {
            reason = Some(BlockReason::Bore {
                bore: seg.bore,
                ratio,
                min_ratio: rules.min_bore_ratio,
            });
        }
        if let Some(reason) = reason {
            return Ok(Verdict {
                feasible: false,
                blocker: Some(Blocker {
                    s,
                    segment: i,
                    kind: seg.kind,
                    reason,
                }),
            });
        }
    }
    Ok(Verdict {
        feasible: true,
        blocker: None,
    })
}

/// Contents of a robot config: `[robot]`, `[drum]` and optional `[rules]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfig {
    pub profile: RobotProfile,
    pub drum: DrumConfig,
    pub rules: MaterialRules,
}

impl RobotConfig {
    pub fn from_config(text: &str) -> Result<Self, FeasibilityError> {
        let doc = Document::parse(text)?;
        doc.expect_sections(&["robot", "drum", "rules"])?;
        let robot = doc
            .unique("robot")?
            .ok_or_else(|| ConfigError::new(1, "missing [robot] section"))?;
        robot.expect_keys(&["sleeve_length_m", "flat_diameter_m", "material"])?;
        let material: Material = robot.require("material")?;
        let profile = RobotProfile::new(
            robot.require_f64("sleeve_length_m")?,
            robot.require_f64("flat_diameter_m")?,
            material,
        )
        .map_err(|e| ConfigError::new(robot.line, e.to_string()))?;

        let drum = match doc.unique("drum")? {
            None => DrumConfig::default(),
            Some(sec) => {
                sec.expect_keys(&["drum_radius_m", "ticks_per_rev", "payout_ratio"])?;
                let d = DrumConfig::default();
                DrumConfig::new(
                    sec.get_f64("drum_radius_m")?.unwrap_or(d.drum_radius),
                    sec.get("ticks_per_rev")?.unwrap_or(d.ticks_per_rev),
                    sec.get_f64("payout_ratio")?.unwrap_or(d.payout_ratio),
                )
                .map_err(|e| ConfigError::new(sec.line, e.to_string()))?
            }
        };

        let mut rules = MaterialRules::defaults(material);
        if let Some(sec) = doc.unique("rules")? {
            sec.expect_keys(&["material", "max_sharp_bend_deg", "min_bore_ratio", "notes"])?;
            if let Some(m) = sec.get::<Material>("material")? {
                if m != material {
                    return Err(ConfigError::new(
                        sec.line_of("material"),
                        format!("[rules] material {m} does not match robot material {material}"),
                    )
                    .into());
                }
            }
            if let Some(v) = sec.get_f64("max_sharp_bend_deg")? {
                rules.max_sharp_bend_deg = v;
            }
            if let Some(v) = sec.get_f64("min_bore_ratio")? {
                rules.min_bore_ratio = v;
            }
            if let Some(e) = sec.entry("notes") {
                rules.notes = e.value.clone();
            }
            rules
                .validate()
                .map_err(|e| ConfigError::new(sec.line, e.to_string()))?;
        }
        Ok(Self { profile, drum, rules })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::route::{reference_course, Pose, Segment};

    fn plastic() -> RobotProfile {
        RobotProfile::plastic()
    }

    #[test]
    fn fabric_stalls_at_sharp_bend() {
        let v = can_traverse(
            &RobotProfile::fabric(),
            &MaterialRules::defaults(Material::Fabric),
            &reference_course(),
        )
        .unwrap();
        assert!(!v.feasible);
        let b = v.blocker.unwrap();
        assert!((b.s - 0.5).abs() < 1e-12);
        assert!(matches!(b.reason, BlockReason::SharpBend { angle_deg, .. } if angle_deg == 45.0));
        assert!(b.to_string().contains("sharp-bend"));
    }

    #[test]
    fn plastic_passes_reference_course() {
        let v = can_traverse(
            &plastic(),
            &MaterialRules::defaults(Material::Plastic),
            &reference_course(),
        )
        .unwrap();
        assert_eq!(
            v,
            Verdict {
                feasible: true,
                blocker: None
            }
        );
    }

    #[test]
    fn straight_wide_pipe_is_always_fine() {
        let route = PipeRoute::new(vec![Segment::straight(3.0, 0.07)], Pose::default()).unwrap();
        for robot in [RobotProfile::fabric(), plastic()] {
            let v = can_traverse(&robot, &MaterialRules::defaults(robot.material), &route).unwrap();
            assert!(v.feasible);
        }
    }

    #[test]
    fn tight_constriction_blocks_on_bore() {
        let route = PipeRoute::new(
            vec![
                Segment::straight(0.5, 0.055),
                Segment::constriction(0.1, 0.030),
                Segment::straight(0.5, 0.055),
            ],
            Pose::default(),
        )
        .unwrap();
        let v = can_traverse(&plastic(), &MaterialRules::defaults(Material::Plastic), &route).unwrap();
        let b = v.blocker.unwrap();
        assert_eq!(b.kind, SegmentKind::Constriction);
        assert!((b.s - 0.5).abs() < 1e-12);
        assert!(matches!(b.reason, BlockReason::Bore { .. }));
    }

    #[test]
    fn first_blocker_wins_and_swept_bends_pass() {
        let route = PipeRoute::new(
            vec![
                Segment::straight(0.2, 0.055),
                Segment::swept_bend(0.1, 170.0, 0.055),
                Segment::straight(0.2, 0.055),
                Segment::sharp_bend(60.0, 0.055),
                Segment::straight(0.2, 0.055),
                Segment::constriction(0.1, 0.01),
            ],
            Pose::default(),
        )
        .unwrap();
        let v = can_traverse(
            &RobotProfile::fabric(),
            &MaterialRules::defaults(Material::Fabric),
            &route,
        )
        .unwrap();
        assert_eq!(v.blocker.unwrap().segment, 3);
    }

    #[test]
    fn mismatch_is_an_error() {
        let err = can_traverse(
            &plastic(),
            &MaterialRules::defaults(Material::Fabric),
            &reference_course(),
        );
        assert!(matches!(err, Err(FeasibilityError::MaterialMismatch { .. })));
    }

    #[test]
    fn robot_config_parses() {
        let text = "\
[robot]
sleeve_length_m = 5.0
flat_diameter_m = 0.060
material = fabric

[drum]
drum_radius_m = 0.02
ticks_per_rev = 1024
payout_ratio = 2

[rules]
max_sharp_bend_deg = 20
";
        let cfg = RobotConfig::from_config(text).unwrap();
        assert_eq!(cfg.profile, RobotProfile::fabric());
        assert_eq!(cfg.drum, DrumConfig::default());
        assert_eq!(cfg.rules.max_sharp_bend_deg, 20.0);
        assert_eq!(cfg.rules.min_bore_ratio, 0.6);

        let err = RobotConfig::from_config("[robot]\nsleeve_length_m = 5\nflat_diameter_m = 0.06\nmaterial = rubber\n")
            .unwrap_err();
        assert!(
            matches!(err, FeasibilityError::Config(ConfigError { line: 4, .. })),
            "{err:?}"
        );
        let err = RobotConfig::from_config("[drum]\nticks_per_rev = 1024\n").unwrap_err();
        assert!(matches!(err, FeasibilityError::Config(_)));
        let err = RobotConfig::from_config(
            "[robot]\nsleeve_length_m = 5\nflat_diameter_m = 0.06\nmaterial = fabric\n[rules]\nmin_bore_ratio = 0\n",
        )
        .unwrap_err();
        assert!(matches!(err, FeasibilityError::Config(ConfigError { line: 5, .. })));
    }
}
