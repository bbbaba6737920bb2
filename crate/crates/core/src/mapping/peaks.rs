//! Local-maximum detection with prominence and minimum separation.

use thiserror::Error;

use crate::acquisition::Profile;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeakError {
    #[error("profile is empty")]
    EmptyProfile,
    #[error("minimum separation {min_separation} m is below the bin width {bin_width} m")]
    SeparationBelowBin { min_separation: f64, bin_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Bin center of the local maximum.
    pub s: f64,
    pub height: f64,
    /// Height above the higher of the two saddles toward the nearest higher
    /// terrain on each side.
    pub prominence: f64,
    /// Full width at half prominence, meters.
    pub width: f64,
}

/// Finds prominent maxima in a profile.
///
/// Edge bins are never maxima: a peak must rise and then fall inside the
/// profile. Flat tops report their leftmost bin. Among maxima closer than
/// `min_separation`, the higher survives (ties go to the smaller `s`).
pub fn detect_peaks(profile: &Profile, min_prominence: f64, min_separation: f64) -> Result<Vec<Peak>, PeakError> {
    if profile.is_empty() {
        return Err(PeakError::EmptyProfile);
    }
    if min_separation < profile.bin_width {
        return Err(PeakError::SeparationBelowBin {
            min_separation,
            bin_width: profile.bin_width,
        });
    }
    let xs = profile.positions();
    let ys = profile.readings();
    let mut candidates: Vec<Peak> = local_maxima(&ys)
        .into_iter()
        .filter_map(|i| {
            let prominence = prominence(&ys, i);
            (prominence >= min_prominence).then(|| Peak {
                s: xs[i],
                height: ys[i],
                prominence,
                width: half_prominence_width(&xs, &ys, i, prominence),
            })
        })
        .collect();

    candidates.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.s.total_cmp(&b.s)));
    let mut kept: Vec<Peak> = Vec::new();
    for p in candidates {
        if kept.iter().all(|k| (k.s - p.s).abs() >= min_separation) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.s.total_cmp(&b.s));
    Ok(kept)
}

/// Indices of strict local maxima (plateaus reported at their left end).
fn local_maxima(ys: &[f64]) -> Vec<usize> {
    let n = ys.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if ys[i - 1] < ys[i] {
            let mut j = i;
            while j + 1 < n && ys[j + 1] == ys[i] {
                j += 1;
            }
            if j + 1 < n && ys[j + 1] < ys[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(ys: &[f64], i: usize) -> f64 {
    let h = ys[i];
    let mut left_min = h;
    for &y in ys[..i].iter().rev() {
        if y > h {
            break;
        }
        left_min = left_min.min(y);
    }
    let mut right_min = h;
    for &y in &ys[i + 1..] {
        if y > h {
            break;
        }
        right_min = right_min.min(y);
    }
    h - left_min.max(right_min)
}

fn half_prominence_width(xs: &[f64], ys: &[f64], i: usize, prominence: f64) -> f64 {
    let level = ys[i] - prominence / 2.0;
    let cross = |a: usize, b: usize| {
        // linear interpolation between bins a (above level) and b (at or below)
        let t = (ys[a] - level) / (ys[a] - ys[b]);
        xs[a] + t * (xs[b] - xs[a])
    };
    let mut left = xs[0];
    let mut j = i;
    while j > 0 {
        if ys[j - 1] <= level {
            left = cross(j, j - 1);
            break;
        }
        j -= 1;
    }
    let mut right = xs[xs.len() - 1];
    let mut j = i;
    while j + 1 < ys.len() {
        if ys[j + 1] <= level {
            right = cross(j, j + 1);
            break;
        }
        j += 1;
    }
    right - left
}

/// Automatic prominence threshold: four robust noise sigmas (from the median
/// absolute first difference), and never less than 2% of the profile range.
pub fn auto_prominence(profile: &Profile) -> f64 {
    let ys = profile.readings();
    let range = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
    let mut diffs: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let sigma = if diffs.is_empty() {
        0.0
    } else {
        diffs.sort_by(f64::total_cmp);
        1.4826 * diffs[diffs.len() / 2] / std::f64::consts::SQRT_2
    };
    (4.0 * sigma).max(0.02 * range.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(ys: &[f64]) -> Profile {
        let pts: Vec<(f64, f64)> = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| ((i as f64 + 0.5) * 0.01, y))
            .collect();
        Profile::from_points(0.01, &pts)
    }

    #[test]
    fn flat_profile_has_no_peaks() {
        assert!(detect_peaks(&profile(&[0.0; 50]), 0.0, 0.01).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(
            detect_peaks(&Profile::from_points(0.01, &[]), 0.0, 0.01),
            Err(PeakError::EmptyProfile)
        );
        assert!(matches!(
            detect_peaks(&profile(&[0.0, 1.0, 0.0]), 0.0, 0.001),
            Err(PeakError::SeparationBelowBin { .. })
        ));
    }

    #[test]
    fn prominence_uses_higher_saddle() {
        //            0    1    2    3    4    5    6    7    8
        let ys = [0.0, 5.0, 2.0, 3.0, 1.0, 8.0, 4.0, 6.0, 0.0];
        let peaks = detect_peaks(&profile(&ys), 0.0, 0.01).unwrap();
        let by_s: Vec<(usize, f64)> = peaks
            .iter()
            .map(|p| (((p.s / 0.01) - 0.5).round() as usize, p.prominence))
            .collect();
        assert_eq!(by_s, vec![(1, 4.0), (3, 1.0), (5, 8.0), (7, 2.0)]);
        for p in &peaks {
            assert!(p.prominence <= p.height - 0.0);
        }
        let strong = detect_peaks(&profile(&ys), 3.0, 0.01).unwrap();
        assert_eq!(strong.len(), 2);
    }

    #[test]
    fn separation_keeps_higher_then_smaller_s() {
        let ys = [0.0, 5.0, 0.0, 6.0, 0.0, 0.0, 0.0, 6.0, 0.0, 6.0, 0.0];
        let peaks = detect_peaks(&profile(&ys), 0.0, 0.025).unwrap();
        let idx: Vec<usize> = peaks.iter().map(|p| ((p.s / 0.01) - 0.5).round() as usize).collect();
        assert_eq!(idx, vec![3, 7]);
    }

    #[test]
    fn plateau_reports_left_edge_and_edges_excluded() {
        let ys = [9.0, 1.0, 3.0, 3.0, 3.0, 1.0, 9.5];
        let peaks = detect_peaks(&profile(&ys), 0.0, 0.01).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].s - 0.025).abs() < 1e-12);
        assert_eq!(peaks[0].prominence, 2.0);
    }

    #[test]
    fn width_of_triangle() {
        let ys = [0.0, 0.0, 1.0, 2.0, 1.0, 0.0, 0.0];
        let p = detect_peaks(&profile(&ys), 0.0, 0.01).unwrap()[0];
        assert!((p.width - 0.02).abs() < 1e-12);
    }

    #[test]
    fn single_bump_found_at_any_lower_threshold() {
        let ys: Vec<f64> = (0..100).map(|i| (-((i as f64 - 40.0) / 5.0).powi(2)).exp()).collect();
        for thr in [0.0, 0.1, 0.5, 0.99] {
            let peaks = detect_peaks(&profile(&ys), thr, 0.01).unwrap();
            assert_eq!(peaks.len(), 1);
            assert!((peaks[0].s - 0.405).abs() < 1e-12);
        }
    }

    #[test]
    fn auto_threshold_scales_with_data() {
        let ys: Vec<f64> = (0..100).map(|i| (-((i as f64 - 40.0) / 5.0).powi(2)).exp()).collect();
        let p = profile(&ys);
        let a = auto_prominence(&p);
        let b = auto_prominence(&p.map_readings(|y| 3.0 * y));
        assert!((b - 3.0 * a).abs() < 1e-12);
        assert!(a > 0.0 && a < 0.5);
    }
}
