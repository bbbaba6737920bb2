//! Damped (Levenberg-Marquardt) least squares for point-source positions and
//! strengths.
//!
//! Parameters are `(s_j, ln A_j)` per source, so strengths stay positive.
//! Position derivatives use central differences of the kernel (the geometry
//! goes through route bends); strength derivatives are analytic. The damping
//! term is Marquardt's diagonal scaling, which makes iterates invariant to a
//! rescaling of the readings.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::model::ForwardModel;
use super::peaks::Peak;
use crate::acquisition::Profile;
use crate::route::Vec3;
use crate::sensor::FieldModel;

pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e16;
const POSITION_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("k must be at least 1")]
    ZeroSources,
    #[error("{k} sources is ill-posed for {bins} bins (need k <= bins / 2)")]
    IllPosed { k: usize, bins: usize },
    #[error("profile contains non-finite readings")]
    NonFinite,
    #[error("profile is empty")]
    EmptyProfile,
    #[error("grid search needs k in 1..=2 (got {0})")]
    GridOrder(usize),
    #[error("grid step {grid_step} m is below the bin width {bin_width} m")]
    GridStep { grid_step: f64, bin_width: f64 },
    #[error("grid search would evaluate {0} candidates (limit 1000000)")]
    GridTooLarge(u128),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEstimate {
    pub s: f64,
    pub strength: f64,
    pub kind: FieldModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Sorted by `s`.
    pub estimates: Vec<SourceEstimate>,
    pub rss: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub selected_k: usize,
}

/// Readings with the baseline removed, checked for finiteness.
pub(crate) struct Data {
    pub positions: Vec<f64>,
    /// Quadrature points and weights for each bin.
    pub sensors: Vec<Vec<(Vec3, f64)>>,
    pub target: DVector<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Data {
    pub(crate) fn new(profile: &Profile, model: &ForwardModel) -> Result<Self, FitError> {
        let (first, last) = profile.span().ok_or(FitError::EmptyProfile)?;
        if profile
            .bins
            .iter()
            .any(|b| !b.mean_reading.is_finite() || !b.s_center.is_finite())
        {
            return Err(FitError::NonFinite);
        }
        let positions = profile.positions();
        let sensors = positions
            .iter()
            .map(|&s| model.bin_points(s, profile.bin_width))
            .collect();
        let target = DVector::from_iterator(
            profile.len(),
            profile.bins.iter().map(|b| b.mean_reading - model.baseline),
        );
        Ok(Self {
            positions,
            sensors,
            target,
            lo: first - profile.bin_width,
            hi: last + profile.bin_width,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.positions.len()
    }

    pub(crate) fn kernel_column(&self, model: &ForwardModel, s: f64) -> DVector<f64> {
        let w = model.source_point(s);
        DVector::from_iterator(
            self.n(),
            self.sensors
                .iter()
                .map(|pts| pts.iter().map(|(p, wt)| wt * model.kernel_from(p, &w)).sum::<f64>()),
        )
    }
}

/// Starting points for `k` sources: the `k` most prominent peaks, padded by
/// repeatedly splitting the widest seed in two.
pub fn seed_sources(profile: &Profile, model: &ForwardModel, peaks: &[Peak], k: usize) -> Vec<(f64, f64)> {
    let mut seeds: Vec<Peak> = peaks.to_vec();
    seeds.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.s.total_cmp(&b.s)));
    seeds.truncate(k);
    if seeds.is_empty() {
        // Nothing stood out: start from the highest bin.
        let best = profile
            .bins
            .iter()
            .fold(None::<&crate::acquisition::Bin>, |acc, b| match acc {
                Some(a) if a.mean_reading >= b.mean_reading => Some(a),
                _ => Some(b),
            });
        if let Some(b) = best {
            seeds.push(Peak {
                s: b.s_center,
                height: b.mean_reading,
                prominence: 0.0,
                width: 4.0 * profile.bin_width,
            });
        }
    }
    let scale = profile
        .bins
        .iter()
        .map(|b| (b.mean_reading - model.baseline).abs())
        .fold(0.0, f64::max);
    let floor = if scale > 0.0 { 1e-12 * scale } else { 1e-300 };
    let mut out: Vec<(f64, f64)> = seeds
        .iter()
        .map(|p| (p.s, ((p.height - model.baseline).max(floor)) / model.peak_kernel(p.s)))
        .collect();
    let mut widths: Vec<f64> = seeds.iter().map(|p| p.width.max(profile.bin_width)).collect();
    while out.len() < k {
        let widest = (0..widths.len())
            .max_by(|&a, &b| widths[a].total_cmp(&widths[b]).then(b.cmp(&a)))
            .expect("at least one seed");
        let (s, a) = out[widest];
        let w = widths[widest];
        out[widest] = (s - w / 4.0, a / 2.0);
        widths[widest] = w / 2.0;
        out.push((s + w / 4.0, a / 2.0));
        widths.push(w / 2.0);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Fits `k` point sources to a profile starting from `seeds`.
pub fn fit_sources(profile: &Profile, k: usize, model: &ForwardModel, seeds: &[Peak]) -> Result<FitReport, FitError> {
    if k == 0 {
        return Err(FitError::ZeroSources);
    }
    if profile.is_empty() {
        return Err(FitError::EmptyProfile);
    }
    if k > profile.len() / 2 {
        return Err(FitError::IllPosed { k, bins: profile.len() });
    }
    let data = Data::new(profile, model)?;
    let start = seed_sources(profile, model, seeds, k);
    Ok(levenberg_marquardt(&data, model, &start))
}

struct Eval {
    residual: DVector<f64>,
    rss: f64,
}

fn evaluate(data: &Data, model: &ForwardModel, params: &[f64]) -> Eval {
    let mut prediction = DVector::zeros(data.n());
    for pair in params.chunks(2) {
        let col = data.kernel_column(model, pair[0]);
        prediction.axpy(pair[1].exp(), &col, 1.0);
    }
    let residual = &data.target - prediction;
    let rss = residual.norm_squared();
    Eval { residual, rss }
}

/// d(residual)/d(params), shape n x 2k.
fn jacobian(data: &Data, model: &ForwardModel, params: &[f64]) -> DMatrix<f64> {
    let n = data.n();
    let mut jac = DMatrix::zeros(n, params.len());
    for (j, pair) in params.chunks(2).enumerate() {
        let (s, a) = (pair[0], pair[1].exp());
        let col = data.kernel_column(model, s);
        let h = POSITION_STEP;
        let fwd = data.kernel_column(model, s + h);
        let back = data.kernel_column(model, s - h);
        let ds = (fwd - back) / (2.0 * h);
        jac.set_column(2 * j, &(-a * ds));
        jac.set_column(2 * j + 1, &(-a * col));
    }
    jac
}

fn solve(normal: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = normal.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    normal.clone().lu().solve(rhs)
}

pub(crate) fn levenberg_marquardt(data: &Data, model: &ForwardModel, start: &[(f64, f64)]) -> FitReport {
    let mut params: Vec<f64> = start
        .iter()
        .flat_map(|&(s, a)| [s.clamp(data.lo, data.hi), a.max(f64::MIN_POSITIVE).ln()])
        .collect();
    let mut current = evaluate(data, model, &params);
    let signal = data.target.norm_squared();
    let negligible = f64::EPSILON * f64::EPSILON * signal;
    let mut damping = INITIAL_DAMPING;
    let mut iterations = 0;
    let mut converged = current.rss <= negligible;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = jacobian(data, model, &params);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let gradient = &jt * &current.residual;
        let diag_max = jtj.diagonal().amax();
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut normal = jtj.clone();
            for i in 0..params.len() {
                normal[(i, i)] += damping * jtj[(i, i)].max(1e-30 * diag_max).max(f64::MIN_POSITIVE);
            }
            let Some(step) = solve(&normal, &(-&gradient)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params
                .iter()
                .zip(step.iter())
                .enumerate()
                .map(|(i, (p, d))| {
                    let v = p + d;
                    if i % 2 == 0 {
                        v.clamp(data.lo, data.hi)
                    } else {
                        v
                    }
                })
                .collect();
            if trial.iter().any(|v| !v.is_finite()) {
                damping *= 10.0;
                continue;
            }
            let eval = evaluate(data, model, &trial);
            if eval.rss < current.rss {
                let improvement = (current.rss - eval.rss) / current.rss;
                params = trial;
                current = eval;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if improvement < RELATIVE_TOLERANCE || current.rss <= negligible {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // No damped step lowers the cost: a stationary point to working
            // precision.
            converged = true;
        }
    }

    let mut estimates: Vec<SourceEstimate> = params
        .chunks(2)
        .map(|p| SourceEstimate {
            s: p[0],
            strength: p[1].exp(),
            kind: model.kind,
        })
        .collect();
    estimates.sort_by(|a, b| a.s.total_cmp(&b.s));
    FitReport {
        selected_k: estimates.len(),
        estimates,
        rss: current.rss,
        n_iterations: iterations,
        converged,
    }
}
