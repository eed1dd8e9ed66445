//! Static SVG 1.1 charts for report documents.
//!
//! Mode colors are fixed: min_eig based modes are green, spectral radius and
//! norm modes red, determinant modes blue, weight gray.

use std::fmt::Write;

use kernelspect_core::modes::CompressionMode;
use thiserror::Error;

use crate::report::{ReportDocument, ReportKind};

#[derive(Debug, Error, PartialEq)]
pub enum SvgError {
    #[error("no chart for `{0}` reports; use scores, layers, history or sweep")]
    UnsupportedKind(ReportKind),
    #[error("report has no `{0}` column")]
    MissingColumn(String),
}

pub fn mode_color(mode: CompressionMode) -> &'static str {
    match mode {
        CompressionMode::MinEig => "#2e7d32",
        CompressionMode::MinEigReal => "#7cb342",
        CompressionMode::SpectralRadius => "#c62828",
        CompressionMode::SpectralRadiusReal => "#ef6c00",
        CompressionMode::SpectralNorm => "#ad1457",
        CompressionMode::Det => "#1565c0",
        CompressionMode::DetGram => "#4fc3f7",
        CompressionMode::Weight => "#757575",
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub fn render(doc: &ReportDocument) -> Result<String, SvgError> {
    match doc.kind {
        ReportKind::Layers => line_chart(doc, "layer_index", "activity", "layer index", "active parameter ratio", |x| x),
        ReportKind::History => line_chart(doc, "epoch", "kernel_prune_ratio", "epoch", "kernel prune ratio", |x| x),
        ReportKind::Sweep => line_chart(
            doc,
            "threshold",
            "kernel_prune_ratio",
            "log10 threshold",
            "kernel prune ratio",
            f64::log10,
        ),
        ReportKind::Scores => bar_chart(doc),
        other => Err(SvgError::UnsupportedKind(other)),
    }
}

fn col(doc: &ReportDocument, name: &str) -> Result<usize, SvgError> {
    doc.column(name).ok_or_else(|| SvgError::MissingColumn(name.to_string()))
}

fn modes_of(doc: &ReportDocument) -> Result<Vec<(CompressionMode, usize)>, SvgError> {
    let m = col(doc, "mode")?;
    Ok(doc
        .records()
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r[m].as_str().and_then(|s| s.parse().ok()).map(|mode| (mode, i)))
        .collect())
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    x0: f64,
    x1: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        let t = if self.x1 > self.x0 { (x - self.x0) / span } else { 0.5 };
        LEFT + t * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y / self.y1) * (HEIGHT - TOP - BOTTOM)
    }
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: &[f64]) {
    let (xl, xr, yb, yt) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{xl:.2}" y1="{yb:.2}" x2="{xr:.2}" y2="{yb:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{xl:.2}" y1="{yb:.2}" x2="{xl:.2}" y2="{yt:.2}"/>"#);
    let _ = writeln!(out, "</g>");
    for i in 0..=4 {
        let v = f.y1 * i as f64 / 4.0;
        let y = f.py(v);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{xl:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            xl - 4.0,
            xl - 7.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    for &t in x_ticks {
        let x = f.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            yb + 4.0,
            yb + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        xl + (xr - xl) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        yt + (yb - yt) / 2.0,
        yt + (yb - yt) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, modes: &[CompressionMode]) {
    let x = WIDTH - RIGHT + 20.0;
    for (i, m) in modes.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 18.0,
            x + 24.0,
            y + 4.0,
            m.as_str(),
            c = mode_color(*m)
        );
    }
}

fn y_top(max: f64) -> f64 {
    if !(max > 0.0 && max.is_finite()) || (0.5..=1.0).contains(&max) {
        1.0
    } else {
        max * 1.05
    }
}

fn line_chart(
    doc: &ReportDocument,
    x_col: &str,
    y_col: &str,
    x_label: &str,
    y_label: &str,
    x_map: fn(f64) -> f64,
) -> Result<String, SvgError> {
    let (xc, yc) = (col(doc, x_col)?, col(doc, y_col)?);
    let rows = modes_of(doc)?;
    let mut series: Vec<(CompressionMode, Vec<(f64, f64)>)> = Vec::new();
    for mode in CompressionMode::ALL {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|(m, _)| *m == mode)
            .filter_map(|&(_, i)| {
                let r = &doc.records()[i];
                Some((x_map(r[xc].as_f64()?), r[yc].as_f64()?))
            })
            .collect();
        if !pts.is_empty() {
            series.push((mode, pts));
        }
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        ymax = ymax.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    let frame = Frame {
        x0,
        x1,
        y1: y_top(ymax),
    };
    let mut xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ticks: Vec<f64> = if xs.len() <= 12 {
        xs
    } else {
        (0..=5).map(|i| x0 + (x1 - x0) * i as f64 / 5.0).collect()
    };

    let mut out = String::new();
    header(&mut out, &format!("{} ({})", doc.meta.snapshot, doc.kind));
    axes(&mut out, &frame, x_label, y_label, &ticks);
    for (mode, pts) in &series {
        let c = mode_color(*mode);
        let _ = writeln!(out, r#"<g class="{}">"#, mode.as_str());
        if pts.len() >= 2 {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
                path.join(" ")
            );
        }
        for &(x, y) in pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    legend(&mut out, &series.iter().map(|(m, _)| *m).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Kernel ratio (solid) and weight ratio (faded) per mode.
fn bar_chart(doc: &ReportDocument) -> Result<String, SvgError> {
    let (kc, wc) = (col(doc, "kernel_prune_ratio")?, col(doc, "weight_prune_ratio")?);
    let rows = modes_of(doc)?;
    let vals: Vec<(CompressionMode, f64, f64)> = rows
        .iter()
        .map(|&(m, i)| {
            let r = &doc.records()[i];
            (m, r[kc].as_f64().unwrap_or(0.0), r[wc].as_f64().unwrap_or(0.0))
        })
        .collect();
    let ymax = vals.iter().fold(0.0f64, |a, v| a.max(v.1).max(v.2));
    let frame = Frame {
        x0: 0.0,
        x1: vals.len().max(1) as f64,
        y1: y_top(ymax),
    };
    let mut out = String::new();
    header(&mut out, &format!("{} ({})", doc.meta.snapshot, doc.kind));
    axes(&mut out, &frame, "compression mode", "prune ratio", &[]);
    let slot = (WIDTH - LEFT - RIGHT) / vals.len().max(1) as f64;
    for (i, (m, k, w)) in vals.iter().enumerate() {
        let x = frame.px(i as f64) + slot * 0.1;
        let bw = slot * 0.4;
        let c = mode_color(*m);
        for (j, (v, opacity)) in [(*k, "1"), (*w, "0.45")].into_iter().enumerate() {
            let top = frame.py(v);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bw:.2}" height="{:.2}" fill="{c}" fill-opacity="{opacity}"/>"#,
                x + bw * j as f64,
                HEIGHT - BOTTOM - top
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" transform="rotate(-35 {:.2} {:.2})" font-size="10">{}</text>"#,
            x + bw,
            HEIGHT - BOTTOM + 14.0,
            x + bw,
            HEIGHT - BOTTOM + 14.0,
            m.as_str()
        );
    }
    legend(&mut out, &vals.iter().map(|v| v.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}
