//! Minimal SVG charts. Coordinates are printed with two decimals so the same
//! input always renders to the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 + f * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(xr.0 + f * (xr.1 - xr.0))
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick_label(yr.0 + f * (yr.1 - yr.0))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

/// Polyline chart with a legend; `fixed` pins both ranges (e.g. ROC space).
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], fixed: Option<((f64, f64), (f64, f64))>) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let (xr, yr) = fixed.unwrap_or_else(|| (span(all().map(|p| p.0)), span(all().map(|p| p.1))));
    let px = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (W - LEFT - RIGHT);
    let py = |y: f64| (H - BOTTOM) - (y - yr.0) / (yr.1 - yr.0) * (H - BOTTOM - TOP);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, xr, yr, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if pts.len() == 1 {
            let _ = writeln!(out, r#"<circle cx="{}" r="3" fill="{color}"/>"#, pts[0].replace(',', "\" cy=\""));
        } else if !pts.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn ramp(t: f64) -> String {
    // dark blue → teal → yellow
    let stops = [(0.0, (68.0, 1.0, 84.0)), (0.5, (33.0, 145.0, 140.0)), (1.0, (253.0, 231.0, 37.0))];
    let t = t.clamp(0.0, 1.0);
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let f = (t - a.0) / (b.0 - a.0);
    let mix = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.1 .0, b.1 .0), mix(a.1 .1, b.1 .1), mix(a.1 .2, b.1 .2))
}

/// Cells on a rectilinear grid; absent cells stay blank.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, cells: &[(f64, f64, f64)]) -> String {
    let key = |v: f64| format!("{v:.9}");
    let xs: BTreeMap<String, f64> = cells.iter().map(|c| (key(c.0), c.0)).collect();
    let ys: BTreeMap<String, f64> = cells.iter().map(|c| (key(c.1), c.1)).collect();
    let mut xv: Vec<f64> = xs.values().copied().collect();
    let mut yv: Vec<f64> = ys.values().copied().collect();
    xv.sort_by(f64::total_cmp);
    yv.sort_by(f64::total_cmp);
    let (vlo, vhi) = span(cells.iter().map(|c| c.2));
    let xr = span(xv.iter().copied());
    let yr = span(yv.iter().copied());
    let (cw, ch) = (
        (W - LEFT - RIGHT) / xv.len().max(1) as f64,
        (H - TOP - BOTTOM) / yv.len().max(1) as f64,
    );
    let mut out = String::new();
    header(&mut out, title);
    for c in cells.iter().filter(|c| c.2.is_finite()) {
        let i = xv.iter().position(|v| key(*v) == key(c.0)).unwrap_or(0);
        let j = yv.iter().position(|v| key(*v) == key(c.1)).unwrap_or(0);
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            LEFT + i as f64 * cw,
            H - BOTTOM - (j + 1) as f64 * ch,
            cw + 0.05,
            ch + 0.05,
            ramp((c.2 - vlo) / (vhi - vlo))
        );
    }
    axes(&mut out, xr, yr, xlabel, ylabel);
    for k in 0..=10 {
        let f = k as f64 / 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            W - RIGHT + 20.0,
            H - BOTTOM - (k + 1) as f64 * (H - TOP - BOTTOM) / 11.0,
            (H - TOP - BOTTOM) / 11.0 + 0.05,
            ramp(f)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, W - RIGHT + 40.0, TOP + 10.0, tick_label(vhi));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, W - RIGHT + 40.0, H - BOTTOM, tick_label(vlo));
    out.push_str("</svg>\n");
    out
}
