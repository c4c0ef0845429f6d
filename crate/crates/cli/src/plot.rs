//! Deterministic SVG 1.1 plots of rate regions in the `(R1, R2)` plane.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlotError {
    #[error("no region with points to plot")]
    EmptyData,
}

/// A closed region drawn as a polygon through `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Region {
    /// The box `[0, r1] x [0, r2]`.
    pub fn rectangle(label: impl Into<String>, r1: f64, r2: f64) -> Self {
        Self { label: label.into(), points: vec![(0.0, 0.0), (r1, 0.0), (r1, r2), (0.0, r2)] }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const STYLES: [(&str, &str); 6] = [
    ("#1f77b4", "none"),
    ("#d62728", "8,4"),
    ("#2ca02c", "2,3"),
    ("#9467bd", "10,3,2,3"),
    ("#ff7f0e", "4,4"),
    ("#17becf", "1,2"),
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `regions` with labeled axes in bits per channel use and a legend.
pub fn emit_plot(title: &str, regions: &[Region]) -> Result<String, PlotError> {
    if regions.iter().all(|r| r.points.is_empty()) {
        return Err(PlotError::EmptyData);
    }
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let (mut xmax, mut ymax) = (0.0f64, 0.0f64);
    for (x, y) in regions.iter().flat_map(|r| r.points.iter()) {
        xmax = xmax.max(finite(*x));
        ymax = ymax.max(finite(*y));
    }
    let xmax = if xmax > 0.0 { xmax * 1.1 } else { 1.0 };
    let ymax = if ymax > 0.0 { ymax * 1.1 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + finite(x) / xmax * plot_w;
    let sy = |y: f64| TOP + plot_h - finite(y) / ymax * plot_h;

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();

    // axes, ticks and grid
    let (x0, y0) = (sx(0.0), sy(0.0));
    writeln!(w, r#"<g stroke="black" stroke-width="1">"#).unwrap();
    writeln!(w, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/>"#, LEFT + plot_w).unwrap();
    writeln!(w, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{TOP:.2}"/>"#).unwrap();
    writeln!(w, "</g>").unwrap();
    writeln!(w, r#"<g font-family="sans-serif" font-size="11">"#).unwrap();
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (f * xmax, f * ymax);
        let (px, py) = (sx(xv), sy(yv));
        writeln!(w, r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(w, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#, y0 + 18.0).unwrap();
        writeln!(w, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, x0 - 8.0, py + 4.0).unwrap();
        if i > 0 {
            writeln!(
                w,
                r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{TOP:.2}" stroke="#dddddd" stroke-width="0.5"/>"##
            )
            .unwrap();
            writeln!(
                w,
                r##"<line x1="{x0:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd" stroke-width="0.5"/>"##,
                LEFT + plot_w
            )
            .unwrap();
        }
    }
    writeln!(w, "</g>").unwrap();
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">R1 (bits/channel use)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">R2 (bits/channel use)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, r) in regions.iter().enumerate() {
        let (color, dash) = STYLES[i % STYLES.len()];
        let points: Vec<String> = r.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            w,
            r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            points.join(" ")
        )
        .unwrap();
    }

    // legend
    let lx = LEFT + plot_w + 20.0;
    writeln!(w, r#"<g font-family="sans-serif" font-size="12">"#).unwrap();
    for (i, r) in regions.iter().enumerate() {
        let (color, dash) = STYLES[i % STYLES.len()];
        let ly = TOP + 10.0 + 22.0 * i as f64;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            lx + 30.0
        )
        .unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 36.0, ly + 4.0, escape(&r.label)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}
