//! CSV rows, log-log slopes and SVG plots drawn from the CSV text.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use cgst_core::linalg::linear_fit;
use serde::Serialize;

use crate::experiment::PointStats;

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub series: String,
    pub x: f64,
    pub total_shots: u64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_repeats: usize,
    pub seed: u64,
}

impl Row {
    pub fn new(series: &str, x: f64, total_shots: u64, stats: &PointStats, seed: u64) -> Self {
        Self {
            series: series.to_string(),
            x,
            total_shots,
            mean: stats.mean,
            lo: stats.lo,
            hi: stats.hi,
            n_repeats: stats.n,
            seed,
        }
    }

    /// Width of the percentile band in decades.
    pub fn log_band(&self) -> f64 {
        self.hi.log10() - self.lo.log10()
    }
}

pub fn csv_header(var: &str) -> String {
    format!("series,{var},total_shots,mean_distance,p0.5,p99.5,n_repeats,seed,config_hash")
}

pub fn to_csv(var: &str, rows: &[Row], hash: &str) -> String {
    let mut s = csv_header(var);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{:e},{},{:e},{:e},{:e},{},{},{}",
            r.series, r.x, r.total_shots, r.mean, r.lo, r.hi, r.n_repeats, r.seed, hash
        )
        .unwrap();
    }
    s
}

/// Parse a sweep CSV back into its point-variable name and rows.
pub fn parse_csv(text: &str) -> Result<(String, Vec<Row>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("empty csv"))?.split(',').collect();
    if header.len() != 9 || header[0] != "series" {
        bail!("unexpected csv header");
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            bail!("line {}: expected 9 fields", k + 2);
        }
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| anyhow!("line {}: bad number {:?}", k + 2, f[i])) };
        rows.push(Row {
            series: f[0].to_string(),
            x: num(1)?,
            total_shots: f[2].parse()?,
            mean: num(3)?,
            lo: num(4)?,
            hi: num(5)?,
            n_repeats: f[6].parse()?,
            seed: f[7].parse()?,
        });
    }
    Ok((header[1].to_string(), rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slope {
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
}

impl Slope {
    /// Value of the fitted line at `x`.
    pub fn at(&self, x: f64) -> f64 {
        10f64.powf(self.intercept + self.slope * x.log10())
    }
}

/// OLS of log₁₀ mean distance on log₁₀ x, over points with `x <= x_max`.
pub fn fit_slope(points: &[(f64, f64)], x_max: Option<f64>) -> Option<Slope> {
    let used: Vec<&(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x_max.is_none_or(|m| *x <= m))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = used.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = used.iter().map(|p| p.1.log10()).collect();
    let (intercept, slope) = linear_fit(&lx, &ly);
    Some(Slope { slope, intercept, n_points: used.len() })
}

/// Series names in order of first appearance.
pub fn series_names(rows: &[Row]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.series) {
            names.push(r.series.clone());
        }
    }
    names
}

pub fn series<'a>(rows: &'a [Row], name: &str) -> Vec<&'a Row> {
    rows.iter().filter(|r| r.series == name).collect()
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Log-log plot of mean distance with percentile bands, one colour per series.
pub fn svg_from_csv(text: &str) -> Result<String> {
    let (var, rows) = parse_csv(text)?;
    let pos = |v: f64| v.is_finite() && v > 0.0;
    let pts: Vec<&Row> = rows.iter().filter(|r| pos(r.x) && pos(r.lo) && pos(r.hi) && pos(r.mean)).collect();
    let (w, h, m) = (640.0, 440.0, 70.0);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#)?;
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#)?;
    if pts.is_empty() {
        writeln!(s, "</svg>")?;
        return Ok(s);
    }
    let lx = |v: f64| v.log10();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for r in &pts {
        x0 = x0.min(lx(r.x));
        x1 = x1.max(lx(r.x));
        y0 = y0.min(lx(r.lo));
        y1 = y1.max(lx(r.hi));
    }
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    y0 = y0.floor();
    y1 = y1.ceil().max(y0 + 1.0);
    let px = |v: f64| m + (lx(v) - x0) / (x1 - x0) * (w - 1.5 * m);
    let py = |v: f64| h - m - (lx(v) - y0) / (y1 - y0) * (h - 1.5 * m);

    writeln!(s, r##"<g stroke="#999" stroke-width="0.5">"##)?;
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#, m / 2.0, h - m)?;
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        writeln!(s, r#"<line x1="{m:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, w - m / 2.0)?;
    }
    writeln!(s, "</g>")?;
    writeln!(s, r#"<g font-family="sans-serif" font-size="12">"#)?;
    for d in x0 as i32..=x1 as i32 {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, px(10f64.powi(d)), h - m + 18.0)?;
    }
    for d in y0 as i32..=y1 as i32 {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, m - 6.0, py(10f64.powi(d)) + 4.0)?;
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{var}</text>"#, w / 2.0, h - 20.0)?;
    writeln!(s, r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">mean trace distance</text>"#, h / 2.0, h / 2.0)?;
    writeln!(s, "</g>")?;

    for (k, name) in series_names(&pts.iter().map(|r| (*r).clone()).collect::<Vec<_>>()).iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let mut sr: Vec<&&Row> = pts.iter().filter(|r| &r.series == name).collect();
        sr.sort_by(|a, b| a.x.total_cmp(&b.x));
        let upper: Vec<String> = sr.iter().map(|r| format!("{:.2},{:.2}", px(r.x), py(r.hi))).collect();
        let lower: Vec<String> = sr.iter().rev().map(|r| format!("{:.2},{:.2}", px(r.x), py(r.lo))).collect();
        writeln!(s, r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.15" stroke="none"/>"#, upper.join(" "), lower.join(" "))?;
        let line: Vec<String> = sr.iter().map(|r| format!("{:.2},{:.2}", px(r.x), py(r.mean))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, line.join(" "))?;
        for r in &sr {
            writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(r.x), py(r.mean))?;
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="{c}">{name}</text>"#,
            w - m * 1.4,
            m / 2.0 + 16.0 * (k as f64 + 1.0)
        )?;
    }
    writeln!(s, "</svg>")?;
    Ok(s)
}
