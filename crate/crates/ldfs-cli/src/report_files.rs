//! Static report emission: CSV tables and an SVG gap-curve plot.

use std::fs;
use std::path::Path;

use ldfs_metrics::EvalReport;

use crate::error::{PipelineError, Result};

pub const CSV_SUBDIR: &str = "csv";
pub const PLOT_FILE: &str = "plot.svg";

pub fn emit_report_files(run_dir: &Path, report: &EvalReport) -> Result<()> {
    let csv_dir = run_dir.join(CSV_SUBDIR);
    fs::create_dir_all(&csv_dir).map_err(|e| PipelineError::io(&csv_dir, e))?;
    for (name, content) in [
        ("scores.csv", report.scores_csv()),
        ("accuracy.csv", report.accuracy_csv()),
        ("gap_curve.csv", report.gap_curve_csv()),
        ("nn_table.csv", report.nn_table_csv()),
    ] {
        let path = csv_dir.join(name);
        fs::write(&path, content).map_err(|e| PipelineError::io(&path, e))?;
    }
    let svg = gap_curve_svg(&report.gap_curve);
    let path = run_dir.join(PLOT_FILE);
    fs::write(&path, svg).map_err(|e| PipelineError::io(&path, e))?;
    Ok(())
}

/// Minimal static line plot of mean gap against noise level.
pub fn gap_curve_svg(curve: &[(f64, f64)]) -> String {
    let (w, h, pad) = (480.0, 320.0, 48.0);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">modality gap vs noise level</text>\n",
        w / 2.0
    ));

    if !curve.is_empty() {
        let x_min = curve.iter().map(|(g, _)| *g).fold(f64::INFINITY, f64::min);
        let x_max = curve.iter().map(|(g, _)| *g).fold(f64::NEG_INFINITY, f64::max);
        let y_min = curve.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        let y_max = curve.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let x_span = (x_max - x_min).max(1e-12);
        let y_span = (y_max - y_min).max(1e-12);
        let to_x = |g: f64| pad + (g - x_min) / x_span * (w - 2.0 * pad);
        let to_y = |v: f64| h - pad - (v - y_min) / y_span * (h - 2.0 * pad);

        svg.push_str(&format!(
            "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - pad,
            w - pad,
            h - pad
        ));
        svg.push_str(&format!(
            "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - pad
        ));

        let points: Vec<String> = curve
            .iter()
            .map(|(g, v)| format!("{},{}", to_x(*g), to_y(*v)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#2060c0\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
        for (g, v) in curve {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#2060c0\"/>\n",
                to_x(*g),
                to_y(*v)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{g}</text>\n",
                to_x(*g),
                h - pad + 16.0
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{y_max:.4}</text>\n",
            pad - 4.0,
            pad + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{y_min:.4}</text>\n",
            pad - 4.0,
            h - pad
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
