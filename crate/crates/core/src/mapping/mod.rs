//! From profiles to located sources.
//!
//! Peak detection seeds a damped least-squares fit of point sources along the
//! route; the number of sources is chosen with a BIC-style penalty. An
//! exhaustive grid search over positions (linear in the strengths) serves as
//! an independent check on the fitter.

pub mod fit;
pub mod localize;
pub mod model;
pub mod oracle;
pub mod peaks;
pub mod select;

pub use fit::{fit_sources, seed_sources, FitError, FitReport, SourceEstimate};
pub use localize::{
    find_peaks, localize, localize_detailed, localize_profile, Localization, LocalizeOptions, MapError,
};
pub use model::{ForwardModel, LateralOffset};
pub use oracle::grid_oracle;
pub use peaks::{auto_prominence, detect_peaks, Peak, PeakError};
pub use select::{information_criterion, select_model, select_model_detailed, Candidate};
