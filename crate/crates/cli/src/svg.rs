//! Self-contained SVG step plot of strategy ECDFs on [0, 1] x [0, 1].

use std::fmt::Write as _;

use wasp_core::voting::EcdfCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const PLOT: f64 = 400.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn px(x: f64) -> f64 {
    LEFT + x * PLOT
}

fn py(y: f64) -> f64 {
    TOP + (1.0 - y) * PLOT
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Vertices of the right-continuous step function from (0, 0) to (1, 1).
pub fn step_points(curve: &EcdfCurve) -> Vec<(f64, f64)> {
    let mut points = vec![(0.0, 0.0)];
    let mut level = 0.0;
    for (&x, &f) in curve.x.iter().zip(&curve.cdf) {
        points.push((x, level));
        points.push((x, f));
        level = f;
    }
    points.push((1.0, level));
    points
}

pub fn render_ecdf(curves: &[EcdfCurve]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    for i in 0..=4 {
        let t = f64::from(i) / 4.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#eee\"/>\
             <line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#eee\"/>",
            x = px(t),
            y0 = py(0.0),
            y1 = py(1.0),
            x0 = px(0.0),
            x1 = px(1.0),
            y = py(t),
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t:.2}</text>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{t:.2}</text>",
            px(t),
            py(0.0) + 16.0,
            px(0.0) - 6.0,
            py(t) + 4.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#,
        px(0.0),
        py(1.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">scaled accuracy</text>"#,
        px(0.5),
        py(0.0) + 34.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">ECDF</text>"#,
        py(0.5)
    );

    for (i, curve) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = step_points(curve)
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="ecdf" data-strategy="{}" fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            escape(&curve.strategy),
            path.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = px(1.0) + 20.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="3"/><text x="{}" y="{}">{} (AUC {:.3})</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.strategy),
            curve.auc
        );
    }
    svg.push_str("</svg>\n");
    svg
}
