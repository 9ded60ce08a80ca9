//! Plain SVG line chart of regret curves with shaded error bands.

use std::fmt::Write as _;

use crate::harness::CurveSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 45.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders mean log10 regret against iteration, one line per strategy with
/// a band of plus or minus one bootstrap standard deviation.
pub fn regret_svg(summary: &CurveSummary) -> String {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_it = 1usize;
    for r in &summary.rows {
        if let (Some(m), Some(s)) = (finite(r.mean_log10_regret), finite(r.bootstrap_std)) {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
        max_it = max_it.max(r.iteration);
    }
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        lo = c - 0.5;
        hi = c + 0.5;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |it: usize| {
        if max_it == 1 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + plot_w * (it - 1) as f64 / (max_it - 1) as f64
        }
    };
    let y_of = |v: f64| MARGIN_TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            MARGIN_LEFT - 4.0,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let ticks: Vec<usize> = if max_it <= 10 {
        (1..=max_it).collect()
    } else {
        let step = max_it.div_ceil(5);
        std::iter::once(1).chain((1..=5).map(|k| k * step).filter(|&t| t <= max_it)).collect()
    };
    let base = MARGIN_TOP + plot_h;
    for t in ticks {
        let x = x_of(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{base}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#,
            base + 4.0,
            base + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">iteration</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">mean log10 regret</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (k, name) in summary.strategies().into_iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64, f64)> = summary
            .curve(name)
            .into_iter()
            .filter_map(|r| Some((x_of(r.iteration), finite(r.mean_log10_regret)?, finite(r.bootstrap_std)?)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for (x, m, sd) in &pts {
            let _ = write!(band, "{x:.2},{:.2} ", y_of(m + sd));
        }
        for (x, m, sd) in pts.iter().rev() {
            let _ = write!(band, "{x:.2},{:.2} ", y_of(m - sd));
        }
        let line: Vec<String> = pts.iter().map(|(x, m, _)| format!("{x:.2},{:.2}", y_of(*m))).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
