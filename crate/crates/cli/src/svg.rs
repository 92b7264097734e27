//! Chromaticity-diagram plots.

use std::fmt::Write;

use tilegamut::stone::{chroma_intersection, primary_chromas};
use tilegamut::Chroma;

use crate::instance::Instance;
use crate::pipeline::PipelineOutput;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 180.0;

const PROJECTOR_COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const RESULT_COLORS: [(&str, &str); 3] = [("volmax", "#d62728"), ("qcp", "#ff7f0e"), ("stone", "#17becf")];

struct Frame {
    lo: (f64, f64),
    span: f64,
}

impl Frame {
    fn fit(points: &[Chroma]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = (lo.0.min(p.u), lo.1.min(p.v));
            hi = (hi.0.max(p.u), hi.1.max(p.v));
        }
        if !lo.0.is_finite() {
            return Self {
                lo: (0.0, 0.0),
                span: 1.0,
            };
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-6) * 1.1;
        let mid = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
        Self {
            lo: (mid.0 - span / 2.0, mid.1 - span / 2.0),
            span,
        }
    }

    fn map(&self, c: &Chroma) -> (f64, f64) {
        let inner = SIZE - 2.0 * MARGIN;
        (
            MARGIN + (c.u - self.lo.0) / self.span * inner,
            SIZE - MARGIN - (c.v - self.lo.1) / self.span * inner,
        )
    }

    fn points(&self, poly: &[Chroma]) -> String {
        poly.iter()
            .map(|c| {
                let (x, y) = self.map(c);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders projector primary triangles, their common chromaticity polygon,
/// the black/white chromaticity and each resulting standard gamut triangle.
pub fn emit_svg(inst: &Instance, out: &PipelineOutput) -> String {
    let projectors: Vec<(String, [Chroma; 3])> = inst
        .projectors
        .iter()
        .filter_map(|p| primary_chromas(&p.gamut).ok().map(|t| (p.id.clone(), t)))
        .collect();
    let polygon = chroma_intersection(&inst.gamuts())
        .map(|p| p.vertices)
        .unwrap_or_default();
    let results: Vec<(String, [Chroma; 3])> = out
        .results
        .iter()
        .filter_map(|r| primary_chromas(&r.gamut.gamut()).ok().map(|t| (r.method.clone(), t)))
        .collect();
    let bw = out.black_white.map(|b| b.chroma);

    let mut all: Vec<Chroma> = projectors.iter().flat_map(|(_, t)| *t).collect();
    all.extend(results.iter().flat_map(|(_, t)| *t));
    all.extend(bw);
    let frame = Frame::fit(&all);

    let width = SIZE + LEGEND_WIDTH;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{SIZE}" viewBox="0 0 {width} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#cccccc"/>"##,
        inner = SIZE - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">u</text>"#,
        x = SIZE / 2.0,
        y = SIZE - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">v</text>"#,
        y = SIZE / 2.0
    );

    let mut legend: Vec<(String, String, &str)> = Vec::new();
    for (i, (id, tri)) in projectors.iter().enumerate() {
        let color = PROJECTOR_COLORS[i % PROJECTOR_COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polygon class="projector" data-id="{}" points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            escape(id),
            frame.points(tri)
        );
        legend.push((format!("projector {id}"), color.to_string(), "line"));
    }
    if polygon.len() >= 3 {
        let _ = writeln!(
            s,
            r##"<polygon class="intersection" points="{}" fill="#999999" fill-opacity="0.3" stroke="#555555" stroke-dasharray="4 2"/>"##,
            frame.points(&polygon)
        );
        legend.push(("common chromaticities".into(), "#999999".into(), "fill"));
    }
    for (method, tri) in &results {
        let color = RESULT_COLORS
            .iter()
            .find(|(m, _)| m == method)
            .map_or("#000000", |(_, c)| c);
        let _ = writeln!(
            s,
            r#"<polygon class="result" data-method="{method}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            frame.points(tri)
        );
        legend.push((format!("{method} standard gamut"), color.to_string(), "line"));
    }
    if let Some(c) = bw {
        let (x, y) = frame.map(&c);
        let _ = writeln!(
            s,
            r#"<circle class="black-white" cx="{x:.3}" cy="{y:.3}" r="4" fill="black"/>"#
        );
        legend.push(("black/white chromaticity".into(), "#000000".into(), "dot"));
    }

    let _ = writeln!(s, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (i, (label, color, kind)) in legend.iter().enumerate() {
        let y = MARGIN + 20.0 * i as f64;
        let x = SIZE + 10.0;
        match *kind {
            "dot" => {
                let _ = writeln!(s, r#"<circle cx="{}" cy="{y}" r="4" fill="{color}"/>"#, x + 10.0);
            }
            "fill" => {
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{}" width="20" height="10" fill="{color}" fill-opacity="0.3"/>"#,
                    y - 5.0
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
                    x + 20.0
                );
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(label));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
