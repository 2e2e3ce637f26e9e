//! Two-sided control chart rendered as a standalone SVG.
//!
//! The upper statistic and its limit sit above the reflection boundary, the
//! lower statistic and its limit below it. Limits are drawn dashed and
//! points beyond a limit are marked. Output depends only on the input, so
//! identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub t: u32,
    pub upper: f64,
    pub lower: f64,
    pub upper_limit: f64,
    pub lower_limit: f64,
}

impl ChartPoint {
    /// Builds a point from the two statistics, their shared boundary and
    /// the thresholds of the square-root flag rules, so that a curve
    /// crosses its limit exactly when the rule fires.
    pub fn from_rules(t: u32, upper: f64, lower: f64, mu: f64, h_upper: f64, h_lower: f64) -> Self {
        let root = mu.max(0.0).sqrt();
        ChartPoint {
            t,
            upper,
            lower,
            upper_limit: (root + h_upper).powi(2),
            lower_limit: (root - h_lower).max(0.0).powi(2),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// The chart as SVG text.
pub fn render_svg(points: &[ChartPoint]) -> Result<String> {
    let first = points.first().ok_or(Error::EmptySeries)?;
    let last = points.last().expect("nonempty");
    let (t0, t1) = (f64::from(first.t), f64::from(last.t).max(f64::from(first.t) + 1.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        for v in [p.upper, p.lower, p.upper_limit, p.lower_limit] {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() {
        return Err(Error::InvalidConfig("chart values are not finite".into()));
    }
    if hi - lo < 1e-9 {
        hi += 0.5;
        lo -= 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: u32| LEFT + (f64::from(t) - t0) / (t1 - t0) * plot_w;
    let y = |v: f64| TOP + (hi - v.clamp(lo, hi)) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // Axes and ticks.
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.2},{y0:.2} L{x0:.2},{y1:.2} L{x1:.2},{y1:.2}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * f64::from(i) / 5.0;
        let yy = y(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            x0 - 6.0,
            yy + 4.0
        );
        let t = t0 + (t1 - t0) * f64::from(i) / 5.0;
        let xx = LEFT + (t - t0) / (t1 - t0) * plot_w;
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.2}" font-size="11" text-anchor="middle">{:.0}</text>"#,
            y1 + 16.0,
            t
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">time</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">statistic</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let polyline = |svg: &mut String, f: &dyn Fn(&ChartPoint) -> f64, colour: &str, dashed: bool, class: &str| {
        let coords: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", x(p.t), y(f(p)))).collect();
        let dash = if dashed { r#" stroke-dasharray="2,3""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#,
            coords.join(" ")
        );
    };
    polyline(&mut svg, &|p| p.upper_limit, "#444444", true, "upper-limit");
    polyline(&mut svg, &|p| p.lower_limit, "#444444", true, "lower-limit");
    polyline(&mut svg, &|p| p.upper, "#c0392b", false, "upper");
    polyline(&mut svg, &|p| p.lower, "#2471a3", false, "lower");
    for p in points {
        if p.upper > p.upper_limit {
            let _ = writeln!(
                svg,
                r##"<circle class="upper-flag" cx="{:.2}" cy="{:.2}" r="2.5" fill="#c0392b"/>"##,
                x(p.t),
                y(p.upper)
            );
        }
        if p.lower < p.lower_limit {
            let _ = writeln!(
                svg,
                r##"<circle class="lower-flag" cx="{:.2}" cy="{:.2}" r="2.5" fill="#2471a3"/>"##,
                x(p.t),
                y(p.lower)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_chart(points: &[ChartPoint], path: &Path) -> Result<()> {
    let svg = render_svg(points)?;
    std::fs::write(path, svg).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
