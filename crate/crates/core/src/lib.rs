//! Simulation and 1D source mapping for a sensor carried on the tail of an
//! eversion robot.
//!
//! The tail-mounted sensor travels at twice the tip speed and enters the pipe
//! only after half the sleeve has everted. Readings are binned against the
//! sensor's arc position and inverted for point-source positions and strengths.

// Validation compares with negated operators so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod config;
pub mod feasibility;
pub mod kinematics;
pub mod mapping;
pub mod plot;
pub mod report;
pub mod route;
pub mod sensor;
pub mod sim;

pub use acquisition::{build_profile, parse_trace_csv, write_trace_csv, Profile, Sample, Trace};
pub use feasibility::{can_traverse, MaterialRules, RobotConfig, Verdict};
pub use kinematics::{extension_from_ticks, sensor_position, DrumConfig, Material, RobotProfile};
pub use mapping::{localize, FitReport, LocalizeOptions, SourceEstimate};
pub use route::{PipeRoute, Pose, Segment};
pub use sensor::{FieldModel, Scene, SensorConfig, Source};
