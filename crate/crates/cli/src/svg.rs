//! Minimal static SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    pub dashed: bool,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1e-300) {
        let pad = lo.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(out: &mut String, title: &str, x_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, x: (f64, f64), y: (f64, f64)) {
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 - f * (y0 - y1);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{y1}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#dddddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            tick(x.0 + f * (x.1 - x.0))
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick(y.0 + f * (y.1 - y.0))
        );
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn project(v: f64, (lo, hi): (f64, f64), (p0, p1): (f64, f64)) -> f64 {
    p0 + (v - lo) / (hi - lo) * (p1 - p0)
}

/// Line chart of several series sharing the abscissa `xs`.
pub fn line_chart(title: &str, x_label: &str, xs: &[f64], series: &[Series<'_>]) -> String {
    let mut out = String::new();
    header(&mut out, title, x_label);
    let xr = range(xs.iter().cloned());
    let yr = range(series.iter().flat_map(|s| s.values.iter().cloned()));
    axes(&mut out, xr, yr);
    let px = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let py = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(s.values)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", project(*x, xr, px), project(*y, yr, py)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal band colored by a categorical state per sample.
pub fn timeline(title: &str, xs: &[f64], states: &[&str], legend: &[(&str, &str)]) -> String {
    let mut out = String::new();
    header(&mut out, title, "t (s)");
    let xr = range(xs.iter().cloned());
    let px = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP + 40.0, HEIGHT - MARGIN_BOTTOM - 40.0);
    let color_of = |s: &str| legend.iter().find(|(n, _)| *n == s).map(|(_, c)| *c).unwrap_or("#999999");
    let mut start = 0;
    for k in 1..=xs.len() {
        if k == xs.len() || states[k] != states[start] {
            let x0 = project(xs[start], xr, px);
            let x1 = if k == xs.len() {
                project(xs[k - 1], xr, px)
            } else {
                project(xs[k], xr, px)
            };
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{top}" width="{:.2}" height="{}" fill="{}"/>"#,
                (x1 - x0).max(0.5),
                bottom - top,
                color_of(states[start])
            );
            start = k;
        }
    }
    for (k, (name, color)) in legend.iter().enumerate() {
        let lx = MARGIN_LEFT + 140.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{lx}" y="{}" width="14" height="14" fill="{color}"/>"#,
            MARGIN_TOP
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{name}</text>"#, lx + 20.0, MARGIN_TOP + 11.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (px.0 + px.1) / 2.0,
        bottom + 16.0,
        format_args!("{} to {}", tick(xr.0), tick(xr.1))
    );
    out.push_str("</svg>\n");
    out
}
