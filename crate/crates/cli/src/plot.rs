//! Static SVG traces of monitoring statistics.

use std::fmt::Write;

use daepca::monitor::StatSeries;

const WIDTH: f64 = 900.0;
const PANEL: f64 = 200.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const GAP: f64 = 45.0;

struct Panel<'a> {
    name: &'a str,
    values: &'a [f64],
    threshold: f64,
    log: bool,
}

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.max(1e-12).log10()
    } else {
        v
    }
}

fn draw_panel(svg: &mut String, p: &Panel<'_>, y0: f64, onset: Option<usize>) {
    let n = p.values.len().max(2);
    let plot_w = WIDTH - LEFT - RIGHT;
    let ys: Vec<f64> = p
        .values
        .iter()
        .map(|&v| transform(if v.is_finite() { v } else { f64::MAX }, p.log))
        .collect();
    let th = transform(p.threshold, p.log);
    let (mut lo, mut hi) = ys
        .iter()
        .chain(std::iter::once(&th))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !p.log {
        lo = lo.min(0.0);
        hi = hi.max(1.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let sx = |i: f64| LEFT + plot_w * i / (n - 1) as f64;
    let sy = |v: f64| y0 + PANEL * (1.0 - (v - lo) / (hi - lo));

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{y0}" width="{plot_w}" height="{PANEL}" fill="none" stroke="#888"/>"##
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let label = if p.log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.2}")
        };
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{label}</text>"##,
            LEFT - 6.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" font-size="13" font-weight="bold">{}</text>"##,
        LEFT,
        y0 - 8.0,
        p.name
    );
    let mut pts = String::with_capacity(ys.len() * 14);
    for (i, &v) in ys.iter().enumerate() {
        let _ = write!(pts, "{:.1},{:.1} ", sx(i as f64), sy(v.min(hi)));
    }
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1" points="{}"/>"##,
        pts.trim_end()
    );
    let (x2, yt) = (WIDTH - RIGHT, sy(th));
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" x2="{x2:.1}" y1="{yt:.1}" y2="{yt:.1}" stroke="#c0392b" stroke-dasharray="6,4"/>"##
    );
    if let Some(k) = onset {
        let x = sx(k as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" x2="{x:.1}" y1="{y0}" y2="{:.1}" stroke="#333" stroke-dasharray="2,3"/>"##,
            y0 + PANEL
        );
    }
}

/// Three stacked panels (T², SPE on log scales; BIC on [0, 1]) with dashed
/// control limits and an optional fault-onset marker.
pub fn trace_svg(series: &StatSeries, onset: Option<usize>, title: &str) -> String {
    let th = &series.thresholds;
    let panels = [
        Panel {
            name: "T²",
            values: &series.t2,
            threshold: th.j_t2,
            log: true,
        },
        Panel {
            name: "SPE",
            values: &series.spe,
            threshold: th.j_spe,
            log: true,
        },
        Panel {
            name: "BIC",
            values: &series.bic,
            threshold: 1.0 - th.alpha,
            log: false,
        },
    ];
    let height = TOP + panels.len() as f64 * (PANEL + GAP) + 10.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"##
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text>"##,
        WIDTH / 2.0,
        escape(title)
    );
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut svg, p, TOP + 15.0 + k as f64 * (PANEL + GAP), onset);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
