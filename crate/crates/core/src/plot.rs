//! Self-contained SVG line charts of metric traces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{MetricRecord, MetricTrace};

/// Smallest value drawn on the logarithmic consensus-error axis.
pub const LOG_FLOOR: f64 = 1e-16;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Panel<'a> {
    title: &'a str,
    log: bool,
    series: Vec<Vec<(f64, f64)>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn loss_of(r: &MetricRecord) -> Option<f64> {
    r.avg_model_loss.or(r.mean_loss).filter(|v| v.is_finite())
}

/// Renders consensus error (log scale) and loss against round, one series per trace.
pub fn render_svg(series: &[(&str, &MetricTrace)]) -> Result<String> {
    if series.is_empty() || series.iter().all(|(_, t)| t.records.is_empty()) {
        return Err(Error::Config("cannot plot an empty trace".into()));
    }
    let consensus = Panel {
        title: "consensus error",
        log: true,
        series: series
            .iter()
            .map(|(_, t)| {
                t.records
                    .iter()
                    .filter(|r| r.consensus_error.is_finite())
                    .map(|r| (r.round as f64, r.consensus_error.max(LOG_FLOOR).log10()))
                    .collect()
            })
            .collect(),
    };
    let loss = Panel {
        title: "loss",
        log: false,
        series: series
            .iter()
            .map(|(_, t)| {
                t.records
                    .iter()
                    .filter_map(|r| loss_of(r).map(|l| (r.round as f64, l)))
                    .collect()
            })
            .collect(),
    };

    let width = 2.0 * (PANEL_W + MARGIN) + MARGIN;
    let legend_h = 18.0 * series.len() as f64 + 10.0;
    let height = PANEL_H + 2.0 * MARGIN + legend_h;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in [consensus, loss].iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL_W + MARGIN);
        draw_panel(&mut svg, panel, x0, MARGIN);
    }
    for (k, (label, _)) in series.iter().enumerate() {
        let y = PANEL_H + 2.0 * MARGIN + 18.0 * k as f64;
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn draw_panel(svg: &mut String, panel: &Panel, x0: f64, y0: f64) {
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/><text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 10.0,
        panel.title
    );
    let points: Vec<&(f64, f64)> = panel.series.iter().flatten().collect();
    if points.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H / 2.0
        );
        return;
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &&(x, y) in &points {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * PANEL_W;
    let sy = |y: f64| y0 + PANEL_H - (y - ymin) / (ymax - ymin) * PANEL_H;
    let label = |v: f64| {
        if panel.log {
            format!("1e{v:.0}")
        } else {
            format!("{v:.3}")
        }
    };
    for (v, anchor_y) in [(ymin, y0 + PANEL_H), (ymax, y0 + 10.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor_y}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            label(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x0}" y="{}">{xmin}</text><text x="{}" y="{}" text-anchor="end">{xmax}</text><text x="{}" y="{}" text-anchor="middle">round</text>"#,
        y0 + PANEL_H + 16.0,
        x0 + PANEL_W,
        y0 + PANEL_H + 16.0,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 32.0
    );
    for (k, series) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if series.len() == 1 {
            let (x, y) = series[0];
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
            continue;
        }
        let pts: Vec<String> = series
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
}

/// Writes [`render_svg`] output to `path`.
pub fn emit_plot(series: &[(&str, &MetricTrace)], path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::TraceMeta;

    fn trace(values: &[f64]) -> MetricTrace {
        let mut t = MetricTrace::new(TraceMeta {
            method: "gut".into(),
            topology: "ring".into(),
            n: 4,
            seed: None,
        });
        for (round, &v) in values.iter().enumerate() {
            t.records.push(MetricRecord {
                round,
                consensus_error: v,
                mean_loss: None,
                avg_model_loss: Some(v + 1.0),
                avg_model_accuracy: None,
                eta: None,
                comm_scalars: 0,
            });
        }
        t
    }

    #[test]
    fn single_point_chart() {
        let svg = render_svg(&[("gut", &trace(&[0.5]))]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn zero_error_is_clamped_to_floor() {
        let svg = render_svg(&[("gossip", &trace(&[1.0, 0.0, 0.0]))]).unwrap();
        assert!(svg.contains("1e-16"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn overlaid_series_are_labeled() {
        let a = trace(&[1.0, 0.5, 0.25]);
        let b = trace(&[1.0, 0.1, 0.01]);
        let svg = render_svg(&[("gossip", &a), ("gut <mu=0.5>", &b)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains(">gossip<"));
        assert!(svg.contains("gut &lt;mu=0.5&gt;"));
    }

    #[test]
    fn empty_trace_is_rejected() {
        assert!(render_svg(&[("x", &trace(&[]))]).is_err());
        let dir = std::env::temp_dir()
            .join("no-such-dir-for-plot")
            .join("a")
            .join("b.svg");
        assert!(emit_plot(&[("x", &trace(&[1.0]))], &dir).is_err());
    }
}
