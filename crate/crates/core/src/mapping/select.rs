//! Choosing the number of sources with a BIC-style penalty.

use super::fit::{fit_sources, FitError, FitReport};
use super::model::ForwardModel;
use super::peaks::Peak;
use crate::acquisition::Profile;

/// Relative residual floor. Fits below `n * (RSS_FLOOR * scale)^2` are all
/// treated as exact so rounding noise cannot buy extra sources.
const RSS_FLOOR: f64 = 1e-9;

/// `n ln(rss / n) + 2 k ln(n)`.
pub fn information_criterion(rss: f64, n: usize, k: usize) -> f64 {
    let n_f = n as f64;
    n_f * (rss / n_f).ln() + 2.0 * k as f64 * n_f.ln()
}

/// One scored candidate from [`select_model_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub k: usize,
    pub score: f64,
    pub report: FitReport,
}

/// Fits `k = 1..=kmax` (capped at half the bin count) and keeps the model
/// with the lowest criterion; ties go to the smaller `k`.
pub fn select_model(
    profile: &Profile,
    kmax: usize,
    model: &ForwardModel,
    seeds: &[Peak],
) -> Result<FitReport, FitError> {
    let (best, _) = select_model_detailed(profile, kmax, model, seeds)?;
    Ok(best)
}

pub fn select_model_detailed(
    profile: &Profile,
    kmax: usize,
    model: &ForwardModel,
    seeds: &[Peak],
) -> Result<(FitReport, Vec<Candidate>), FitError> {
    if kmax == 0 {
        return Err(FitError::ZeroSources);
    }
    let n = profile.len();
    let limit = kmax.min(n / 2);
    if limit == 0 {
        return Err(FitError::IllPosed { k: 1, bins: n });
    }
    let scale = profile
        .bins
        .iter()
        .map(|b| (b.mean_reading - model.baseline).abs())
        .fold(0.0, f64::max);
    let floor = n as f64 * (RSS_FLOOR * scale).powi(2);

    let mut candidates = Vec::with_capacity(limit);
    for k in 1..=limit {
        let report = fit_sources(profile, k, model, seeds)?;
        let score = information_criterion(report.rss.max(floor), n, k);
        candidates.push(Candidate { k, score, report });
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.score < candidates[best].score {
            best = i;
        }
    }
    let mut chosen = candidates[best].report.clone();
    chosen.selected_k = candidates[best].k;
    Ok((chosen, candidates))
}
