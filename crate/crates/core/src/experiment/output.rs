//! Trace CSVs, log-log SVG plots and the summary table.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ExperimentReport;
use crate::error::{Error, Result};
use crate::solvers::Trace;
use crate::vecgeo::Vector;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `n,gap,gmap_norm,step_norm,dist_star,<extras>` and, when the trace kept
/// its iterates, `x_0 … x_{d−1}`. Missing values are empty fields.
pub fn render_csv(trace: &Trace) -> String {
    let extras: BTreeSet<&String> = trace.records.iter().flat_map(|r| r.extras.keys()).collect();
    let dim = trace.iterates.as_ref().map_or(0, |_| trace.final_x.dim());
    let mut out = String::from("n,gap,gmap_norm,step_norm,dist_star");
    for k in &extras {
        out.push(',');
        out.push_str(k);
    }
    for i in 0..dim {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.n,
            opt(r.gap),
            num(r.gmap_norm),
            num(r.step_norm),
            opt(r.dist_star)
        );
        for k in &extras {
            out.push(',');
            out.push_str(&opt(r.extras.get(*k).copied()));
        }
        if dim > 0 {
            let x = trace.iterates.as_ref().and_then(|it| it.get(r.n));
            for i in 0..dim {
                out.push(',');
                if let Some(x) = x {
                    out.push_str(&num(x[i]));
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(trace: &Trace, path: &Path) -> Result<()> {
    fs::write(path, render_csv(trace))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Rows where both columns are present.
    pub fn series(&self, x: &str, y: &str) -> Option<Vec<(f64, f64)>> {
        let xs = self.column(x)?;
        let ys = self.column(y)?;
        Some(xs.into_iter().zip(ys).filter_map(|(a, b)| Some((a?, b?))).collect())
    }

    /// Leading rows whose `x_i` columns are all filled.
    pub fn iterates(&self) -> Vec<Vector> {
        let cols: Vec<usize> = (0..)
            .map_while(|i| self.header.iter().position(|h| *h == format!("x_{i}")))
            .collect();
        if cols.is_empty() {
            return Vec::new();
        }
        self.rows
            .iter()
            .map_while(|r| cols.iter().map(|&j| r[j]).collect::<Option<Vec<f64>>>())
            .map(Vector::new)
            .collect()
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Csv("empty file".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                fields.len(),
                header.len()
            )));
        }
        let row = fields
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Csv(format!("row {}: cannot parse `{f}`", i + 1)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    parse_csv(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Keep roughly `per_decade·decades` points, evenly spaced in `log x`, plus the last.
pub fn thin_log(points: &[(f64, f64)], per_decade: usize) -> Vec<(f64, f64)> {
    let step = 1.0 / per_decade.max(1) as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut next = f64::NEG_INFINITY;
    for &(x, y) in points {
        let lx = x.log10();
        if lx >= next {
            out.push((x, y));
            next = lx + step;
        }
    }
    if let (Some(last), Some(kept)) = (points.last(), out.last()) {
        if last != kept {
            out.push(*last);
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

/// Standalone log-log SVG: one polyline per series, dashed guides of slope
/// `−p` for every `p` in `guides`, and a legend in input order.
pub fn render_loglog_svg(series: &[PlotSeries], guides: &[f64]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::param("series", "nothing to plot"));
    }
    for s in series {
        if let Some((x, y)) = s
            .points
            .iter()
            .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
        {
            return Err(Error::param(
                "series",
                format!("`{}` has a nonpositive point ({x}, {y})", s.label),
            ));
        }
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |lx: f64| LEFT + (lx - x0) / (x1 - x0) * pw;
    let py = |ly: f64| TOP + (y1 - ly) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
    );
    // decade ticks
    let step = |lo: f64, hi: f64| ((hi - lo) / 8.0).ceil().max(1.0) as usize;
    for k in (x0 as i64..=x1 as i64).step_by(step(x0, x1)) {
        let x = px(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ccc"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0
        );
    }
    for k in (y0 as i64..=y1 as i64).step_by(step(y0, y1)) {
        let y = py(k as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(x.log10()), py(y.log10())))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    // guides start at the first point of the first non-empty series
    let anchor = series
        .iter()
        .find_map(|s| s.points.first())
        .copied()
        .unwrap_or((1.0, 1.0));
    let (ax, ay) = (anchor.0.log10(), anchor.1.log10());
    for g in guides {
        let (ya, yb) = (ay - g * (x0 - ax), ay - g * (x1 - ax));
        let _ = writeln!(
            s,
            r##"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#777" stroke-dasharray="5,4"/>"##,
            px(x0),
            py(ya),
            px(x1),
            py(yb)
        );
    }
    let _ = writeln!(s, "</g>");
    let lx = W - RIGHT + 12.0;
    let mut ly = TOP + 10.0;
    for (i, ser) in series.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text class="legend" x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            PALETTE[i % PALETTE.len()],
            lx + 24.0,
            ly + 4.0,
            escape(&ser.label)
        );
        ly += 16.0;
    }
    for g in guides {
        let _ = writeln!(
            s,
            r##"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="#777" stroke-dasharray="5,4"/><text class="legend" x="{}" y="{}">slope -{g:.3}</text>"##,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0
        );
        ly += 16.0;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn emit_loglog_svg(series: &[PlotSeries], guides: &[f64], path: &Path) -> Result<()> {
    fs::write(path, render_loglog_svg(series, guides)?)?;
    Ok(())
}

/// One row per check outcome.
pub(crate) fn render_summary(report: &ExperimentReport) -> String {
    let mut s = String::from("run,alpha,label,kind,verdict,value,threshold,exponent_hat,window_lo,window_hi,points\n");
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.run,
            opt(c.alpha),
            c.label,
            c.kind,
            c.verdict.as_str(),
            opt(c.value),
            opt(c.threshold),
            opt(c.fit.map(|f| f.exponent_hat)),
            opt(c.fit.map(|f| f.window.0)),
            opt(c.fit.map(|f| f.window.1)),
            c.fit.map(|f| f.points.to_string()).unwrap_or_default()
        );
    }
    s
}
