//! Report serialization: JSON, plot-ready CSV and static SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::analytics::{CurveComparison, IdentifiabilityReport, StabilityReport, TraitDensityPair};
use crate::domain::{Domain, PersonalityCurve};
use crate::evaluate::{IdentifyOutput, PopulationOutput};
use crate::ingest::HumanBaseline;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io { path: path.display().to_string(), source }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn stability_csv(path: &Path, reports: &[StabilityReport]) -> Result<(), ExportError> {
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.persona_id.clone(),
                r.n_raw.to_string(),
                r.n_kept.to_string(),
                r.cv.to_string(),
                r.excess_kurtosis.to_string(),
            ];
            row.extend(r.mean_scores.iter().map(f64::to_string));
            row
        })
        .collect();
    write_rows(
        path,
        &["persona_id", "n_raw", "n_kept", "cv", "excess_kurtosis", "mean_n", "mean_e", "mean_o", "mean_a", "mean_c"],
        rows,
    )
}

pub fn kde_csv(path: &Path, reports: &[StabilityReport]) -> Result<(), ExportError> {
    let mut rows = Vec::new();
    for r in reports {
        for (x, d) in r.kde_curve.grid.iter().zip(&r.kde_curve.density) {
            rows.push(vec![r.persona_id.clone(), x.to_string(), d.to_string()]);
        }
    }
    write_rows(path, &["persona_id", "distance", "density"], rows)
}

fn identify_row(kind: &str, r: &IdentifiabilityReport) -> Vec<String> {
    let mut row = vec![
        kind.to_string(),
        r.persona_ids.join("|"),
        r.ari.to_string(),
        opt(r.centroid_distance),
        r.degenerate.to_string(),
    ];
    row.extend((0..5).map(|i| opt(r.pca_explained.get(i).copied())));
    row
}

pub fn identify_csv(path: &Path, out: &IdentifyOutput) -> Result<(), ExportError> {
    let mut rows: Vec<Vec<String>> = out.pairwise.iter().map(|r| identify_row("pairwise", r)).collect();
    rows.push(identify_row("grouped", &out.grouped));
    write_rows(path, &["kind", "personas", "ari", "centroid_distance", "degenerate", "pc1", "pc2", "pc3", "pc4", "pc5"], rows)
}

pub fn density_csv(path: &Path, out: &IdentifyOutput) -> Result<(), ExportError> {
    let mut rows = Vec::new();
    for (r, pairs) in out.pairwise.iter().zip(&out.densities) {
        let label = r.persona_ids.join("|");
        for p in pairs {
            for ((x, a), b) in p.grid.iter().zip(&p.density_a).zip(&p.density_b) {
                rows.push(vec![label.clone(), p.domain.code().to_string(), x.to_string(), a.to_string(), b.to_string()]);
            }
        }
    }
    write_rows(path, &["pair", "trait", "score", "density_a", "density_b"], rows)
}

pub fn curves_csv(path: &Path, populations: &[PopulationOutput], baseline: &HumanBaseline) -> Result<(), ExportError> {
    let mut rows = Vec::new();
    let mut push = |label: &str, c: &PersonalityCurve| {
        for (b, (v, n)) in c.values.iter().zip(&c.counts).enumerate() {
            rows.push(vec![
                label.to_string(),
                c.trait_domain.code().to_string(),
                c.bin_edges[b].to_string(),
                c.bin_edges[b + 1].to_string(),
                opt(*v),
                n.to_string(),
            ]);
        }
    };
    for d in Domain::ALL {
        push("human", baseline.curve(d));
    }
    for p in populations {
        for c in p.curves.values() {
            push(&p.label, c);
        }
    }
    write_rows(path, &["label", "trait", "bin_lo", "bin_hi", "value", "count"], rows)
}

pub fn comparison_csv(path: &Path, comparisons: &[CurveComparison]) -> Result<(), ExportError> {
    let rows = comparisons
        .iter()
        .map(|c| {
            let mut row = vec![c.label.clone()];
            row.extend(Domain::ALL.iter().map(|d| opt(c.per_trait_distance.get(d).copied())));
            row.push(c.total_distance.to_string());
            row
        })
        .collect();
    write_rows(path, &["label", "n", "e", "o", "a", "c", "total"], rows)
}

/// A named polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Minimal static line chart.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m},{m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [(x0, "start", m, h - m + 14.0), (x1, "end", w - m, h - m + 14.0)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#);
    }
    for (v, y) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{v:.3}</text>"#, m - 4.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 14.0 * i as f64,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), ExportError> {
    fs::write(path, svg).map_err(io(path))
}

fn curve_points(c: &PersonalityCurve) -> Vec<(f64, f64)> {
    c.values
        .iter()
        .enumerate()
        .filter_map(|(b, v)| v.map(|v| ((c.bin_edges[b] + c.bin_edges[b + 1]) / 2.0, v)))
        .collect()
}

/// One chart per trait comparing each population with the human curve.
pub fn curve_charts(populations: &[PopulationOutput], baseline: &HumanBaseline) -> Vec<(Domain, String)> {
    Domain::ALL
        .iter()
        .map(|&d| {
            let mut series = vec![Series { label: "human", points: curve_points(baseline.curve(d)) }];
            for p in populations {
                if let Some(c) = p.curves.get(&d) {
                    series.push(Series { label: &p.label, points: curve_points(c) });
                }
            }
            (d, line_chart_svg(&format!("{} by age", d.name()), "age", "score", &series))
        })
        .collect()
}

pub fn kde_chart(reports: &[StabilityReport]) -> String {
    let series: Vec<Series<'_>> = reports
        .iter()
        .map(|r| Series {
            label: &r.persona_id,
            points: r.kde_curve.grid.iter().copied().zip(r.kde_curve.density.iter().copied()).collect(),
        })
        .collect();
    line_chart_svg("Mahalanobis distance density", "distance", "density", &series)
}

pub fn density_chart(label: &str, p: &TraitDensityPair) -> String {
    let a: Vec<(f64, f64)> = p.grid.iter().copied().zip(p.density_a.iter().copied()).collect();
    let b: Vec<(f64, f64)> = p.grid.iter().copied().zip(p.density_b.iter().copied()).collect();
    let (la, lb) = label.split_once('|').unwrap_or((label, ""));
    line_chart_svg(
        &format!("{} {label}", p.domain.name()),
        "score",
        "density",
        &[Series { label: la, points: a }, Series { label: lb, points: b }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let s = line_chart_svg("a<b", "x", "y", &[Series { label: "s", points: vec![(0.0, 1.0), (1.0, 2.0)] }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b"));
        assert_eq!(s.matches("<polyline").count(), 1);
        let empty = line_chart_svg("t", "x", "y", &[]);
        assert!(!empty.contains("NaN") && !empty.contains("inf"));
    }
}
