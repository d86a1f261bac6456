//! Self-contained SVG line charts of log-likelihood increase per iteration.

use std::fmt::Write as _;

use decme::em::RunTrace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// `l_t - l_0` for t = 0..=T, where `l_0` is the log-likelihood at the start.
pub fn increase_series(trace: &RunTrace) -> Vec<f64> {
    let first = trace.start_loglik;
    trace.logliks().map(|l| l - first).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One polyline per trace. Each polyline carries the plotted values in a
/// `data-increase` attribute so the chart can be checked against the CSV.
pub fn convergence_svg(title: &str, traces: &[&RunTrace]) -> String {
    let series: Vec<Vec<f64>> = traces.iter().map(|t| increase_series(t)).collect();
    let x_max = series
        .iter()
        .map(|s| s.len().saturating_sub(1))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let finite = || series.iter().flatten().copied().filter(|v| v.is_finite());
    let mut y_lo = finite().fold(0.0, f64::min);
    let mut y_hi = finite().fold(0.0, f64::max);
    if y_hi - y_lo < 1e-300 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_Y + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, x1, y0, y1) = (sx(0.0), sx(x_max), sy(y_lo), sy(y_hi));
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = frac * x_max;
        let yv = y_lo + frac * (y_hi - y_lo);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            y0 + 16.0,
            xv.round()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
            x0 - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">log-likelihood increase</text>"#,
        MARGIN_Y + plot_h / 2.0,
        MARGIN_Y + plot_h / 2.0
    );
    let _ = writeln!(svg, r#"<text x="{x0}" y="20">{}</text>"#, escape(title));

    for (i, (trace, s)) in traces.iter().zip(&series).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(t, v)| format!("{:.3},{:.3}", sx(t as f64), sy(*v)))
            .collect();
        let values: Vec<String> = s.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-variant="{}" data-increase="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            trace.variant,
            values.join(" "),
            points.join(" ")
        );
        let ly = MARGIN_Y + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            trace.variant
        );
    }
    svg.push_str("</svg>\n");
    svg
}
