//! Minimal SVG line charts for sweep summaries: median line with an
//! interquartile ribbon per decoder.

use std::fmt::Write as _;

use crate::experiment::{SweepAxis, SweepCell};
use crate::evaluation::Spread;
use crate::inference::Decoder;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    DetectionTime,
}

impl Metric {
    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::DetectionTime => "detection_time",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "steady-state accuracy [%]",
            Metric::DetectionTime => "|switch detection time| [s]",
        }
    }

    fn spread(self, cell: &SweepCell) -> Option<Spread> {
        match self {
            Metric::Accuracy => {
                let a = cell.accuracy;
                Some(Spread {
                    mean: a.mean * 100.0,
                    sd: a.sd * 100.0,
                    q1: a.q1 * 100.0,
                    median: a.median * 100.0,
                    q3: a.q3 * 100.0,
                })
            }
            Metric::DetectionTime => cell.detection_time,
        }
    }
}

fn color(decoder: Decoder) -> &'static str {
    match decoder {
        Decoder::Forward => "#1f77b4",
        Decoder::ForwardBackward => "#d62728",
        Decoder::Viterbi => "#2ca02c",
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() < 0.01 || v.abs() >= 1e5 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders one metric of a sweep as a standalone SVG document.
pub fn render(axis: SweepAxis, cells: &[SweepCell], metric: Metric) -> String {
    let mut decoders: Vec<Decoder> = Vec::new();
    for c in cells {
        if !decoders.contains(&c.decoder) {
            decoders.push(c.decoder);
        }
    }
    let points: Vec<(f64, Decoder, Spread)> = cells
        .iter()
        .filter_map(|c| metric.spread(c).map(|s| (c.value, c.decoder, s)))
        .collect();

    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_x = x_min > 0.0 && x_max / x_min >= 100.0;
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let (mut x_lo, mut x_hi) = (tx(x_min), tx(x_max));
    if !(x_hi > x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }

    let y_min = points.iter().map(|p| p.2.q1.min(p.2.median)).fold(f64::INFINITY, f64::min);
    let y_max = points.iter().map(|p| p.2.q3.max(p.2.median)).fold(f64::NEG_INFINITY, f64::max);
    let (mut y_lo, mut y_hi) = if points.is_empty() { (0.0, 1.0) } else { (y_min, y_max) };
    let pad = ((y_hi - y_lo) * 0.08).max(1e-3);
    y_lo -= pad;
    y_hi += pad;
    if metric == Metric::DetectionTime || metric == Metric::Accuracy {
        y_lo = y_lo.max(0.0);
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (tx(x) - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} vs {}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        metric.label(),
        axis.label()
    );

    // Axes and grid.
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for yt in nice_ticks(y_lo, y_hi, 6) {
        let y = py(yt);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            fmt_tick(yt)
        );
    }
    let x_ticks: Vec<f64> = if log_x {
        nice_ticks(x_lo, x_hi, 6)
            .into_iter()
            .filter(|e| e.fract() == 0.0)
            .map(|e| 10f64.powf(e))
            .collect()
    } else {
        let mut t: Vec<f64> = xs.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        if t.len() > 10 {
            nice_ticks(x_lo, x_hi, 6)
        } else {
            t
        }
    };
    for xt in x_ticks {
        let x = px(xt);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0,
            MARGIN_TOP + plot_h + 19.0,
            fmt_tick(xt)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        axis.label(),
        if log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        metric.label()
    );

    for (i, &decoder) in decoders.iter().enumerate() {
        let mut series: Vec<&(f64, Decoder, Spread)> =
            points.iter().filter(|p| p.1 == decoder).collect();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = color(decoder);
        if !series.is_empty() {
            let mut ribbon = String::new();
            for p in &series {
                let _ = write!(ribbon, "{:.2},{:.2} ", px(p.0), py(p.2.q3));
            }
            for p in series.iter().rev() {
                let _ = write!(ribbon, "{:.2},{:.2} ", px(p.0), py(p.2.q1));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
                ribbon.trim_end()
            );
            let line: Vec<String> = series
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.2.median)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                line.join(" ")
            );
            for p in &series {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                    px(p.0),
                    py(p.2.median)
                );
            }
        }
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{decoder}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
