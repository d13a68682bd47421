//! Minimal SVG plots of `(ρ, Δ)` series on the unit square.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const SIDE: f64 = 440.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn px(x: f64) -> f64 {
    LEFT + SIDE * x.clamp(0.0, 1.0)
}

fn py(y: f64) -> f64 {
    TOP + SIDE * (1.0 - y.clamp(0.0, 1.0))
}

/// Plot with `ρ` on the horizontal axis and `Δ` on the vertical one, both
/// over `[0, 1]`, ticks every 0.1 and one polyline per series.
pub fn frontier_plot(title: &str, series: &[Series]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, LEFT + SIDE / 2.0, escape(title));

    out.push_str("<g stroke=\"#dddddd\" stroke-width=\"1\">\n");
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, px(v), py(0.0), px(v), py(1.0));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, px(0.0), py(v), px(1.0), py(v));
    }
    out.push_str("</g>\n");

    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{SIDE}" height="{SIDE}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    out.push_str("<g stroke=\"black\" stroke-width=\"1\">\n");
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, px(v), py(0.0), px(v), py(0.0) + 5.0);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, px(0.0) - 5.0, py(v), px(0.0), py(v));
    }
    out.push_str("</g>\n<g fill=\"black\">\n");
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.1}</text>"#, px(v), py(0.0) + 18.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, px(0.0) - 8.0, py(v) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">rho (convergence rate)</text>"#, px(0.5), py(0.0) + 38.0);
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">Delta (suboptimality)</text>"#,
        py(0.5),
        py(0.5)
    );
    out.push_str("</g>\n");

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut coords = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            if j > 0 {
                coords.push(' ');
            }
            let _ = write!(coords, "{:.3},{:.3}", px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>"#,
            escape(&s.label)
        );
    }

    let legend_x = px(1.0) + 14.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            legend_x + 18.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, legend_x + 24.0, y + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let series = vec![
            Series { label: "plain".into(), points: vec![(0.8, 0.0), (0.1, 0.5)] },
            Series { label: "a<b & c".into(), points: vec![(0.5, 0.5)] },
        ];
        let svg = frontier_plot("t", &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn coordinates_are_clamped() {
        assert_eq!(px(2.0), LEFT + SIDE);
        assert_eq!(py(-1.0), TOP + SIDE);
    }
}
