//! Standalone SVG line charts rendered from numeric series.
//!
//! No drawing dependencies: charts are assembled as plain SVG text with
//! fixed-precision coordinates, so identical inputs produce byte-identical
//! files that structural tests can diff.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 28.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 58.0;
const TICKS: usize = 5;

/// Visual role of one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineClass {
    /// Light gray background trace (individual trajectories).
    Faint,
    /// Heavy foreground line (means).
    Heavy,
    /// Dashed reference line (baselines).
    Dashed,
    /// Secondary solid line for multi-series charts.
    Accent,
}

impl LineClass {
    fn style(&self) -> &'static str {
        match self {
            LineClass::Faint => "stroke=\"#bdbdbd\" stroke-width=\"1\" fill=\"none\"",
            LineClass::Heavy => "stroke=\"#1a1a1a\" stroke-width=\"2.5\" fill=\"none\"",
            LineClass::Dashed => {
                "stroke=\"#c23b22\" stroke-width=\"2\" stroke-dasharray=\"7,5\" fill=\"none\""
            }
            LineClass::Accent => "stroke=\"#2a6fbb\" stroke-width=\"2\" fill=\"none\"",
        }
    }
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    pub class: LineClass,
}

/// Renders a complete SVG document with axes, ticks, the given series,
/// and a legend for every labelled non-faint series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (x_min, x_max) = padded_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_min, y_max) = padded_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_x = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let to_y = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{y0:.1}\" stroke=\"#333333\" stroke-width=\"1\"/>",
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.1}\" y1=\"{:.1}\" x2=\"{x0:.1}\" y2=\"{y0:.1}\" stroke=\"#333333\" stroke-width=\"1\"/>",
        MARGIN_TOP
    );

    // Ticks and grid.
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let xp = to_x(xv);
        let yp = to_y(yv);
        let _ = writeln!(
            svg,
            "<line x1=\"{xp:.1}\" y1=\"{y0:.1}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>",
            MARGIN_TOP
        );
        let _ = writeln!(
            svg,
            "<text x=\"{xp:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            y0 + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{x0:.1}\" y1=\"{yp:.1}\" x2=\"{:.1}\" y2=\"{yp:.1}\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>",
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            x0 - 6.0,
            yp + 4.0,
            tick_label(yv)
        );
    }

    // Axis labels.
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    // Faint series go first so foreground lines draw on top.
    let mut order: Vec<&Series> = series.iter().filter(|s| s.class == LineClass::Faint).collect();
    order.extend(series.iter().filter(|s| s.class != LineClass::Faint));
    for s in &order {
        if s.points.is_empty() {
            continue;
        }
        let mut coords = String::new();
        for (x, y) in s.points {
            let _ = write!(coords, "{:.2},{:.2} ", to_x(*x), to_y(*y));
        }
        let _ = writeln!(svg, "<polyline points=\"{}\" {}/>", coords.trim_end(), s.class.style());
    }

    // Legend for labelled foreground series.
    let mut legend_y = MARGIN_TOP + 10.0;
    for s in series.iter().filter(|s| !s.label.is_empty() && s.class != LineClass::Faint) {
        let lx = MARGIN_LEFT + plot_w - 170.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx:.1}\" y1=\"{legend_y:.1}\" x2=\"{:.1}\" y2=\"{legend_y:.1}\" {}/>",
            lx + 28.0,
            s.class.style()
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            lx + 34.0,
            legend_y + 4.0,
            escape(s.label)
        );
        legend_y += 18.0;
    }

    svg.push_str("</svg>\n");
    svg
}

fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        let pad = if min == 0.0 { 1.0 } else { min.abs() * 0.1 };
        return (min - pad, max + pad);
    }
    let pad = (max - min) * 0.05;
    (min - pad, max + pad)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(0.001..100_000.0).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
