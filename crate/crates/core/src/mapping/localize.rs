//! Trace to source map: bin, detect, select, and drop weak estimates.

use thiserror::Error;

use super::fit::{FitError, FitReport};
use super::model::{ForwardModel, LateralOffset};
use super::peaks::{auto_prominence, detect_peaks, Peak, PeakError};
use super::select::select_model;
use crate::acquisition::{build_profile, Profile, ProfileError, ProfileOptions, Trace, DEFAULT_BIN_WIDTH};
use crate::kinematics::{DrumConfig, RobotProfile};
use crate::route::PipeRoute;
use crate::sensor::SensorConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Peaks(#[from] PeakError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeOptions {
    pub bin_width: f64,
    pub include_retract: bool,
    /// `None` picks a threshold from the profile's own noise level.
    pub min_prominence: Option<f64>,
    pub min_separation: f64,
    pub kmax: usize,
    pub offset: LateralOffset,
    /// Estimates weaker than this are dropped.
    pub min_strength: f64,
    /// Estimates whose peak response is below this many residual RMS units
    /// are dropped.
    pub min_snr: f64,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            bin_width: DEFAULT_BIN_WIDTH,
            include_retract: false,
            min_prominence: None,
            min_separation: 0.05,
            kmax: 4,
            offset: LateralOffset::HalfBore,
            min_strength: 0.0,
            min_snr: 5.0,
        }
    }
}

/// Intermediate products kept for reporting and plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    /// Profile in reading units.
    pub profile: Profile,
    pub peaks: Vec<Peak>,
    /// Final report after weak estimates were removed; `selected_k` counts the
    /// surviving estimates.
    pub report: FitReport,
    /// How many sources model selection picked before suppression.
    pub selected_before_suppression: usize,
}

impl Localization {
    pub fn no_sources_found(&self) -> bool {
        self.report.estimates.is_empty()
    }
}

/// Peaks with the options' prominence rule applied.
pub fn find_peaks(profile: &Profile, opts: &LocalizeOptions) -> Result<Vec<Peak>, PeakError> {
    let prominence = opts.min_prominence.unwrap_or_else(|| auto_prominence(profile));
    detect_peaks(profile, prominence, opts.min_separation.max(profile.bin_width))
}

pub fn localize_profile(
    profile: Profile,
    route: &PipeRoute,
    sensor: &SensorConfig,
    opts: &LocalizeOptions,
) -> Result<Localization, MapError> {
    let model = ForwardModel::for_sensor(route, sensor).with_offset(opts.offset);
    let peaks = find_peaks(&profile, opts)?;
    let selected = select_model(&profile, opts.kmax, &model, &peaks)?;
    let before = selected.selected_k;
    let rms = (selected.rss / profile.len() as f64).sqrt();
    let mut report = selected;
    report.estimates.retain(|e| {
        let peak = e.strength * model.peak_kernel(e.s);
        e.strength > 0.0 && e.strength >= opts.min_strength && peak >= opts.min_snr * rms
    });
    report.selected_k = report.estimates.len();
    Ok(Localization {
        profile,
        peaks,
        report,
        selected_before_suppression: before,
    })
}

pub fn localize_detailed(
    trace: &Trace,
    drum: &DrumConfig,
    robot: &RobotProfile,
    route: &PipeRoute,
    sensor: &SensorConfig,
    opts: &LocalizeOptions,
) -> Result<Localization, MapError> {
    let raw = build_profile(
        trace,
        drum,
        robot,
        &ProfileOptions {
            bin_width: opts.bin_width,
            include_retract: opts.include_retract,
        },
    )?;
    localize_profile(raw.decoded(sensor), route, sensor, opts)
}

pub fn localize(
    trace: &Trace,
    drum: &DrumConfig,
    robot: &RobotProfile,
    route: &PipeRoute,
    sensor: &SensorConfig,
    opts: &LocalizeOptions,
) -> Result<FitReport, MapError> {
    Ok(localize_detailed(trace, drum, robot, route, sensor, opts)?.report)
}
