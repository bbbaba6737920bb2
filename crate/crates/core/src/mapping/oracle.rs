//! Exhaustive grid search, used to check the continuous fitter.
//!
//! For fixed positions the model is linear in the strengths, so every
//! candidate position set is solved exactly by non-negative linear least
//! squares. No derivatives, no iteration, no seeds.

use nalgebra::{DMatrix, DVector};

use super::fit::{Data, FitError, FitReport, SourceEstimate};
use super::model::ForwardModel;
use crate::acquisition::Profile;

pub const MAX_CANDIDATES: u128 = 1_000_000;

pub fn grid_oracle(profile: &Profile, k: usize, model: &ForwardModel, grid_step: f64) -> Result<FitReport, FitError> {
    if !(1..=2).contains(&k) {
        return Err(FitError::GridOrder(k));
    }
    if !(grid_step >= profile.bin_width) {
        return Err(FitError::GridStep {
            grid_step,
            bin_width: profile.bin_width,
        });
    }
    let data = Data::new(profile, model)?;
    let (first, last) = profile.span().ok_or(FitError::EmptyProfile)?;
    let m = ((last - first) / grid_step + 1e-9).floor() as usize + 1;
    let candidates: u128 = if k == 1 {
        m as u128
    } else {
        m as u128 * (m as u128 - 1) / 2
    };
    if candidates > MAX_CANDIDATES {
        return Err(FitError::GridTooLarge(candidates));
    }
    let grid: Vec<f64> = (0..m).map(|i| first + i as f64 * grid_step).collect();
    let columns: Vec<DVector<f64>> = grid.iter().map(|&s| data.kernel_column(model, s)).collect();
    let y = &data.target;
    let yy = y.norm_squared();
    let proj: Vec<f64> = columns.iter().map(|c| c.dot(y)).collect();
    let gram_diag: Vec<f64> = columns.iter().map(|c| c.norm_squared()).collect();

    // Ranked with the expanded quadratic; the winner's rss is recomputed
    // directly from residuals below.
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut consider = |rss: f64, sol: Vec<(usize, f64)>| {
        if best.as_ref().is_none_or(|(b, _)| rss < *b) {
            best = Some((rss, sol));
        }
    };
    if k == 1 {
        for i in 0..m {
            let a = single(proj[i], gram_diag[i]);
            consider(yy - 2.0 * a * proj[i] + a * a * gram_diag[i], vec![(i, a)]);
        }
    } else {
        for i in 0..m {
            for j in i + 1..m {
                let g12 = columns[i].dot(&columns[j]);
                let (a, b) = pair([proj[i], proj[j]], [gram_diag[i], g12, gram_diag[j]]);
                let rss = yy - 2.0 * (a * proj[i] + b * proj[j])
                    + a * a * gram_diag[i]
                    + 2.0 * a * b * g12
                    + b * b * gram_diag[j];
                consider(rss, vec![(i, a), (j, b)]);
            }
        }
    }
    let (_, solution) = best.expect("grid has at least one candidate");
    let mut design = DMatrix::zeros(data.n(), solution.len());
    for (c, (i, _)) in solution.iter().enumerate() {
        design.set_column(c, &columns[*i]);
    }
    let strengths = DVector::from_iterator(solution.len(), solution.iter().map(|&(_, a)| a));
    let rss = (y - design * strengths).norm_squared();
    let estimates = solution
        .iter()
        .map(|&(i, a)| SourceEstimate {
            s: grid[i],
            strength: a,
            kind: model.kind,
        })
        .collect();
    Ok(FitReport {
        estimates,
        rss,
        n_iterations: 0,
        converged: true,
        selected_k: k,
    })
}

fn single(proj: f64, norm2: f64) -> f64 {
    if norm2 > 0.0 {
        (proj / norm2).max(0.0)
    } else {
        0.0
    }
}

/// Non-negative least squares for two columns by active-set enumeration.
fn pair(c: [f64; 2], g: [f64; 3]) -> (f64, f64) {
    let [g11, g12, g22] = g;
    let cost = |a: f64, b: f64| -2.0 * (a * c[0] + b * c[1]) + a * a * g11 + 2.0 * a * b * g12 + b * b * g22;
    let det = g11 * g22 - g12 * g12;
    if det > 0.0 {
        let a = (g22 * c[0] - g12 * c[1]) / det;
        let b = (g11 * c[1] - g12 * c[0]) / det;
        if a >= 0.0 && b >= 0.0 {
            return (a, b);
        }
    }
    let only_a = (single(c[0], g11), 0.0);
    let only_b = (0.0, single(c[1], g22));
    if cost(only_a.0, only_a.1) <= cost(only_b.0, only_b.1) {
        only_a
    } else {
        only_b
    }
}
