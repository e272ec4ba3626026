//! Correlation reporting between per-method scores, least-squares fit lines,
//! and selection of the image region where methods disagree the most.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imageio::GrayImage;

pub const DEFAULT_REGION: usize = 400;

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values vs {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(invalid("correlation needs at least 2 points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered second moments (Σdx², Σdy², Σdxdy).
fn moments(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), (x, y)| {
        let (dx, dy) = (x - mx, y - my);
        (sxx + dx * dx, syy + dy * dy, sxy + dx * dy)
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let (sxx, syy, sxy) = moments(xs, ys);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linfit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    check_pair(xs, ys)?;
    let (sxx, _, sxy) = moments(xs, ys);
    if sxx == 0.0 {
        return Err(Error::Degenerate("zero variance in x".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, mean(ys) - slope * mean(xs)))
}

/// Per-pixel variance-to-mean ratio across a stack of same-sized images.
/// Pixels whose mean is zero get dispersion 0.
pub fn dispersion_map(images: &[GrayImage]) -> Result<Vec<f64>> {
    if images.len() < 2 {
        return Err(invalid("dispersion needs at least 2 images"));
    }
    let (w, h) = (images[0].width(), images[0].height());
    if images.iter().any(|im| im.width() != w || im.height() != h) {
        return Err(Error::DimensionMismatch("images in the stack differ in size".into()));
    }
    let m = images.len() as f64;
    Ok((0..w * h)
        .into_par_iter()
        .map(|i| {
            let mean = images.iter().map(|im| im.data()[i] as f64).sum::<f64>() / m;
            if mean == 0.0 {
                return 0.0;
            }
            let var = images
                .iter()
                .map(|im| {
                    let d = im.data()[i] as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / m;
            var / mean
        })
        .collect())
}

/// Top-left corner of the `region`×`region` window with the largest mean
/// dispersion. Ties go to the smallest row, then column.
pub fn select_comparison_region(images: &[GrayImage], region: usize) -> Result<(usize, usize)> {
    let disp = dispersion_map(images)?;
    let (w, h) = (images[0].width(), images[0].height());
    if region == 0 || region > w || region > h {
        return Err(invalid(format!("region {region} does not fit a {w}x{h} image")));
    }
    // Summed-area table with a zero border row and column.
    let stride = w + 1;
    let mut sat = vec![0.0f64; (h + 1) * stride];
    for row in 0..h {
        let mut run = 0.0;
        for col in 0..w {
            run += disp[row * w + col];
            sat[(row + 1) * stride + col + 1] = sat[row * stride + col + 1] + run;
        }
    }
    let window = |r: usize, c: usize| {
        let (r1, c1) = (r + region, c + region);
        sat[r1 * stride + c1] - sat[r * stride + c1] - sat[r1 * stride + c] + sat[r * stride + c]
    };
    let best_per_row: Vec<(usize, f64)> = (0..=h - region)
        .into_par_iter()
        .map(|r| {
            let mut best = (0, f64::NEG_INFINITY);
            for c in 0..=w - region {
                let s = window(r, c);
                if s > best.1 {
                    best = (c, s);
                }
            }
            best
        })
        .collect();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for (r, &(c, s)) in best_per_row.iter().enumerate() {
        if s > best.2 {
            best = (r, c, s);
        }
    }
    Ok((best.0, best.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method_id: String,
    pub metric_score: f64,
    pub glicko: f64,
    pub backproj: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScoreTable {
    pub rows: Vec<MethodScore>,
}

impl MethodScoreTable {
    pub fn new(rows: Vec<MethodScore>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.method_id.as_str()) {
                return Err(invalid(format!("duplicate method `{}`", r.method_id)));
            }
        }
        if rows.len() < 2 {
            return Err(invalid("score table needs at least 2 methods"));
        }
        Ok(Self { rows })
    }

    /// Reads `method,metric,glicko[,backproj]`; an empty backproj cell means absent.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let need = |name: &str| col(name).ok_or_else(|| invalid(format!("scores CSV has no `{name}` column")));
        let (mi, si, gi) = (need("method")?, need("metric")?, need("glicko")?);
        let bi = col("backproj");
        let num = |rec: &csv::StringRecord, i: usize, what: &str| -> Result<f64> {
            let cell = rec.get(i).unwrap_or("");
            cell.parse::<f64>().map_err(|_| {
                invalid(format!(
                    "bad {what} value `{cell}` on line {}",
                    rec.position().map_or(0, |p| p.line())
                ))
            })
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let backproj = match bi.and_then(|i| rec.get(i)).filter(|c| !c.is_empty()) {
                Some(_) => Some(num(&rec, bi.unwrap_or(0), "backproj")?),
                None => None,
            };
            rows.push(MethodScore {
                method_id: rec.get(mi).unwrap_or("").to_string(),
                metric_score: num(&rec, si, "metric")?,
                glicko: num(&rec, gi, "glicko")?,
                backproj,
            });
        }
        Self::new(rows)
    }
}

/// Correlation of the metric with one other score column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub name: String,
    pub n: usize,
    pub pearson: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Two points always correlate perfectly.
    pub degenerate: bool,
    /// (method, x = metric, y = other score).
    pub points: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub table: MethodScoreTable,
    pub summaries: Vec<CorrelationSummary>,
}

fn summarize(name: &str, points: Vec<(String, f64, f64)>) -> Result<CorrelationSummary> {
    let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let r = pearson(&xs, &ys)?;
    let (slope, intercept) = linfit(&xs, &ys)?;
    Ok(CorrelationSummary {
        name: name.to_string(),
        n: points.len(),
        pearson: r,
        slope,
        intercept,
        degenerate: points.len() == 2,
        points,
    })
}

/// Metric vs Glicko, and metric vs back-projection error for the rows that carry one.
pub fn correlation_report(table: &MethodScoreTable) -> Result<CorrelationReport> {
    let mut summaries = vec![summarize(
        "metric_vs_glicko",
        table
            .rows
            .iter()
            .map(|r| (r.method_id.clone(), r.metric_score, r.glicko))
            .collect(),
    )?];
    let with_bp: Vec<(String, f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.backproj.map(|b| (r.method_id.clone(), r.metric_score, b)))
        .collect();
    if with_bp.len() >= 2 {
        summaries.push(summarize("metric_vs_backproj", with_bp)?);
    }
    Ok(CorrelationReport {
        table: table.clone(),
        summaries,
    })
}

impl CorrelationReport {
    /// One `point` row per method followed by one `summary` row per correlation.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "record",
            "name",
            "metric",
            "glicko",
            "backproj",
            "pearson",
            "slope",
            "intercept",
            "n",
            "flag",
        ])?;
        for r in &self.table.rows {
            w.write_record([
                "point".to_string(),
                r.method_id.clone(),
                r.metric_score.to_string(),
                r.glicko.to_string(),
                r.backproj.map(|b| b.to_string()).unwrap_or_default(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        for s in &self.summaries {
            w.write_record([
                "summary".to_string(),
                s.name.clone(),
                String::new(),
                String::new(),
                String::new(),
                s.pearson.to_string(),
                s.slope.to_string(),
                s.intercept.to_string(),
                s.n.to_string(),
                if s.degenerate {
                    "degenerate_two_points".into()
                } else {
                    String::new()
                },
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Scatter plot of one correlation with its fitted line.
pub fn scatter_svg(summary: &CorrelationSummary, x_label: &str, y_label: &str, comment: Option<&str>) -> String {
    const W: f64 = 560.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = span(&mut summary.points.iter().map(|p| p.1));
    let (y0, y1) = span(&mut summary.points.iter().map(|p| p.2));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    if let Some(c) = comment {
        let _ = writeln!(svg, "<!--\n{}\n-->", c.replace("--", "- -"));
    }
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 20.0,
        escape_xml(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape_xml(y_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="13">{} (Pearson r = {:.4}{})</text>"#,
        W / 2.0,
        escape_xml(&summary.name),
        summary.pearson,
        if summary.degenerate { ", 2 points" } else { "" }
    );
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{:.4}</text>"#,
            sx(x),
            H - M + 15.0,
            x
        );
    }
    for y in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.4}</text>"#,
            M - 4.0,
            sy(y) + 4.0,
            y
        );
    }
    let (ly0, ly1) = (
        summary.slope * x0 + summary.intercept,
        summary.slope * x1 + summary.intercept,
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-dasharray="6 3"/>"#,
        sx(x0),
        sy(ly0),
        sx(x1),
        sy(ly1)
    );
    for (name, x, y) in &summary.points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            sx(*x),
            sy(*y),
            sx(*x) + 6.0,
            sy(*y) - 6.0,
            escape_xml(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
