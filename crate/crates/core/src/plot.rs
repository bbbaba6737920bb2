//! Static SVG of a profile: reading against sensor arc position, detected
//! peaks circled.

use std::fmt::Write;

use crate::acquisition::Profile;
use crate::mapping::Peak;
use crate::report::sig9;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, s: f64) -> f64 {
        MARGIN_LEFT + (s - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders the profile. Output depends only on the inputs, byte for byte.
/// An empty profile yields `None`.
pub fn render_svg(profile: &Profile, peaks: &[Peak], title: &str) -> Option<String> {
    let (s_lo, s_hi) = profile.span()?;
    let readings = profile.readings();
    let v_lo = readings.iter().copied().fold(f64::INFINITY, f64::min);
    let v_hi = readings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1) = padded(s_lo, s_hi);
    let (y0, y1) = padded(v_lo, v_hi);
    let ax = Axes { x0, x1, y0, y1 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{left:.2},{top:.2} L{left:.2},{bottom:.2} L{right:.2},{bottom:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let s = x0 + f * (x1 - x0);
        let v = y0 + f * (y1 - y0);
        let (px, py) = (ax.px(s), ax.py(v));
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.3}</text>"#,
            bottom + 15.0,
            s
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{py:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3}</text>"#,
            left - 5.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">sensor arc position s (m)</text>"#,
        (left + right) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">reading</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    let mut points = String::new();
    for (i, b) in profile.bins.iter().enumerate() {
        if i > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{:.2},{:.2}", ax.px(b.s_center), ax.py(b.mean_reading));
    }
    let _ = writeln!(
        out,
        r#"<polyline class="profile" points="{points}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#
    );
    for p in peaks {
        let _ = writeln!(
            out,
            r#"<circle class="peak" cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="crimson" stroke-width="2"><title>s = {} m</title></circle>"#,
            ax.px(p.s),
            ax.py(p.height),
            sig9(p.s)
        );
    }
    out.push_str("</svg>\n");
    Some(out)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
