//! Text and key-value renderings of a mapping run.
//!
//! Every real number is printed with nine significant digits so reports are
//! byte-stable across runs and platforms.

use std::fmt::Write;

use crate::mapping::{FitReport, Localization};

/// Nine significant digits in scientific notation.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        // keeps -0.0 and 0.0 identical on disk
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

/// `key = value` lines with one `[estimate]` section per source, readable by
/// the same config parser used for inputs.
pub fn key_value(loc: &Localization) -> String {
    let r = &loc.report;
    let mut out = String::new();
    let _ = writeln!(out, "[fit]");
    let _ = writeln!(out, "selected_k = {}", r.selected_k);
    let _ = writeln!(
        out,
        "selected_k_before_suppression = {}",
        loc.selected_before_suppression
    );
    let _ = writeln!(out, "rss = {}", sig9(r.rss));
    let _ = writeln!(out, "converged = {}", r.converged);
    let _ = writeln!(out, "n_iterations = {}", r.n_iterations);
    let _ = writeln!(out, "n_bins = {}", loc.profile.len());
    let _ = writeln!(out, "bin_width_m = {}", sig9(loc.profile.bin_width));
    let _ = writeln!(out, "n_peaks = {}", loc.peaks.len());
    for e in &r.estimates {
        let _ = writeln!(out, "\n[estimate]");
        let _ = writeln!(out, "s_m = {}", sig9(e.s));
        let _ = writeln!(out, "strength = {}", sig9(e.strength));
        let _ = writeln!(out, "kind = {}", e.kind);
    }
    out
}

pub fn text(loc: &Localization) -> String {
    let r = &loc.report;
    let mut out = String::new();
    let _ = writeln!(out, "source map");
    if let Some((a, b)) = loc.profile.span() {
        let _ = writeln!(
            out,
            "profile: {} bins over s = {} .. {} m ({} samples)",
            loc.profile.len(),
            sig9(a),
            sig9(b),
            loc.profile.total_samples()
        );
    }
    let _ = writeln!(out, "peaks detected: {}", loc.peaks.len());
    for p in &loc.peaks {
        let _ = writeln!(out, "  s = {} m  prominence = {}", sig9(p.s), sig9(p.prominence));
    }
    write_fit(&mut out, r);
    out
}

fn write_fit(out: &mut String, r: &FitReport) {
    let _ = writeln!(
        out,
        "fit: rss = {}, {} iterations, {}",
        sig9(r.rss),
        r.n_iterations,
        if r.converged { "converged" } else { "not converged" }
    );
    if r.estimates.is_empty() {
        let _ = writeln!(out, "no sources found");
        return;
    }
    let _ = writeln!(out, "sources: {}", r.selected_k);
    for (i, e) in r.estimates.iter().enumerate() {
        let _ = writeln!(
            out,
            "  #{}  s = {} m  strength = {}  ({})",
            i + 1,
            sig9(e.s),
            sig9(e.strength),
            e.kind
        );
    }
}
