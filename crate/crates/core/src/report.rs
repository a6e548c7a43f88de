//! Report emission: aligned text table, delimited metrics, plot data and
//! small SVG renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cluster::ElbowScan;
use crate::features::Task;
use crate::mlcore::format_params;
use crate::pipeline::{with_hash_line, EvalReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no model rows")]
    EmptyReport,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// Which artifact families to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub table_text: bool,
    pub delimited: bool,
    pub plot_data: bool,
    pub svg: bool,
}

impl Formats {
    pub fn all() -> Self {
        Self { table_text: true, delimited: true, plot_data: true, svg: true }
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.4}")
}

/// Metric table with one row per model, values rounded to four decimals.
pub fn metrics_table(report: &EvalReport) -> String {
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match report.task {
        Task::Regression => (
            vec!["model", "mse", "params"],
            report.models.iter().map(|m| vec![m.name.clone(), m.mse.map(fixed).unwrap_or_default(), format_params(&m.params)]).collect(),
        ),
        Task::Classification => (
            vec!["model", "accuracy", "precision", "recall", "f1", "auc", "tp", "fp", "tn", "fn", "params"],
            report
                .models
                .iter()
                .map(|m| {
                    let mut r = vec![m.name.clone()];
                    match &m.classification {
                        Some(c) => {
                            r.extend([c.accuracy, c.precision, c.recall, c.f1].map(fixed));
                            r.push(m.roc.as_ref().map(|c| fixed(c.auc)).unwrap_or_default());
                            r.extend([c.counts.tp, c.counts.fp, c.counts.tn, c.counts.fn_].map(|v| v.to_string()));
                        }
                        None => r.extend(std::iter::repeat_n(String::new(), 9)),
                    }
                    r.push(format_params(&m.params));
                    r
                })
                .collect(),
        ),
    };
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let last = header.len() - 1;
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j > 0 {
                s.push_str("  ");
            }
            if j == 0 || j == last {
                let _ = write!(s, "{c:<w$}", w = if j == last { 0 } else { widths[j] });
            } else {
                let _ = write!(s, "{c:>w$}", w = widths[j]);
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    let rule: usize = widths.iter().sum::<usize>() + 2 * last;
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Same rows as the text table with exact values.
pub fn metrics_csv(report: &EvalReport) -> String {
    let mut s = String::new();
    match report.task {
        Task::Regression => {
            s.push_str("model,mse,cv_score,params\n");
            for m in &report.models {
                let mse = m.mse.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{mse},{},{}", csv_cell(&m.name), m.cv_score, csv_cell(&format_params(&m.params)));
            }
        }
        Task::Classification => {
            s.push_str("model,accuracy,precision,recall,f1,auc,tp,fp,tn,fn,degenerate,cv_score,params\n");
            for m in &report.models {
                let _ = write!(s, "{},", csv_cell(&m.name));
                match &m.classification {
                    Some(c) => {
                        let auc = m.roc.as_ref().map(|r| r.auc.to_string()).unwrap_or_default();
                        let _ = write!(
                            s,
                            "{},{},{},{},{auc},{},{},{},{},{},",
                            c.accuracy, c.precision, c.recall, c.f1, c.counts.tp, c.counts.fp, c.counts.tn, c.counts.fn_, c.degenerate
                        );
                    }
                    None => s.push_str(",,,,,,,,,,"),
                }
                let _ = writeln!(s, "{},{}", m.cv_score, csv_cell(&format_params(&m.params)));
            }
        }
    }
    s
}

pub fn mse_comparison_csv(report: &EvalReport) -> String {
    let mut s = String::from("model,mse\n");
    for m in &report.models {
        if let Some(mse) = m.mse {
            let _ = writeln!(s, "{},{mse}", csv_cell(&m.name));
        }
    }
    s
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

/// Minimal line chart: axes, tick labels at the ends, one polyline per series.
fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], diagonal: bool, hash: &str) -> String {
    let (w, h, pad) = (520.0, 400.0, 50.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<!-- config_hash={hash} -->");
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle" font-family="sans-serif">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {} L{pad} {} L{} {}" stroke="black" fill="none"/>"#,
        pad,
        h - pad,
        w - pad,
        h - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif">{x_label}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 14 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (v, anchor_x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(s, r#"<text x="{anchor_x:.1}" y="{}" font-size="10" text-anchor="middle" font-family="sans-serif">{}</text>"#, h - pad + 14.0, tick(v));
    }
    for (v, anchor_y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{anchor_y:.1}" font-size="10" text-anchor="end" font-family="sans-serif">{}</text>"#, pad - 4.0, tick(v));
    }
    if diagonal {
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#, px(0.0), py(0.0), px(1.0), py(1.0));
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = pad + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly:.1}" font-size="11" fill="{color}" font-family="sans-serif">{}</text>"#, w - pad - 110.0, ser.name);
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn roc_svg(report: &EvalReport) -> Option<String> {
    let series: Vec<Series> = report.models.iter().filter_map(|m| m.roc.as_ref().map(|r| Series { name: &m.name, points: r.points.clone() })).collect();
    if series.is_empty() {
        return None;
    }
    Some(line_chart("ROC", "false positive rate", "true positive rate", &series, true, &report.config_hash))
}

pub fn elbow_svg(scan: &ElbowScan, hash: &str) -> String {
    let points = scan.ks.iter().zip(&scan.inertia).map(|(&k, &v)| (k as f64, v)).collect();
    line_chart("Elbow", "k", "inertia", &[Series { name: "inertia", points }], false, hash)
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

/// Writes the selected artifacts into `dir` and returns their paths.
/// Classification reports get one ROC file per model with a curve;
/// regression reports get none.
pub fn emit_reports(report: &EvalReport, dir: &Path, formats: Formats) -> Result<Vec<PathBuf>, ReportError> {
    if report.models.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let hash = &report.config_hash;
    let mut written = Vec::new();
    if formats.table_text {
        let text = format!("config_hash={hash}\ntask={}\n\n{}", report.task.as_str(), metrics_table(report));
        write(dir, "metrics.txt", &text, &mut written)?;
    }
    if formats.delimited {
        write(dir, "metrics.csv", &with_hash_line(hash, &metrics_csv(report)), &mut written)?;
    }
    if formats.plot_data {
        if report.task == Task::Regression {
            write(dir, "mse_comparison.csv", &with_hash_line(hash, &mse_comparison_csv(report)), &mut written)?;
        }
        for m in &report.models {
            if let Some(roc) = &m.roc {
                write(dir, &format!("roc_{}.csv", m.name), &with_hash_line(hash, &roc.to_csv()), &mut written)?;
            }
        }
    }
    if formats.svg {
        if let Some(svg) = roc_svg(report) {
            write(dir, "roc.svg", &svg, &mut written)?;
        }
    }
    Ok(written)
}
