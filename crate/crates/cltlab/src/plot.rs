use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cltlab_core::numerics::loglog_slope;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum PlotKind {
    /// |mc − prediction| (or |mc|) against n on log-log axes, slope per series.
    ConvergenceLoglog,
    /// mc ± 2se against t per n, with the prediction column as a curve.
    TProfile,
    /// |mc| and the bound against n on log-log axes.
    BoundVsMc,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvergenceLoglog => "convergence_loglog",
            Self::TProfile => "t_profile",
            Self::BoundVsMc => "bound_vs_mc",
        }
    }
}

/// Parsed CSV: column names and cells, empty cells as `None`.
struct Frame {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Frame {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if columns.iter().all(|c| c.is_empty()) {
            return Err(CliError::MalformedCsv("missing header row".into()));
        }
        let rows = r.records().map(|rec| Ok(rec?.iter().map(str::to_string).collect())).collect::<Result<_, CliError>>()?;
        Ok(Self { columns, rows })
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn require(&self, name: &str) -> Result<usize, CliError> {
        self.index(name).ok_or_else(|| CliError::MalformedCsv(format!("column `{name}` is missing")))
    }

    fn num(&self, row: usize, col: usize) -> Result<Option<f64>, CliError> {
        let s = self.rows[row][col].trim();
        if s.is_empty() {
            return Ok(None);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(CliError::MalformedCsv(format!("row {}: `{s}` in column `{}` is not a finite number", row + 2, self.columns[col]))),
        }
    }

    /// Series key from the first of `keys` present, e.g. "t=1".
    fn group(&self, row: usize, keys: &[&str]) -> String {
        keys.iter()
            .find_map(|k| self.index(k).map(|i| format!("{k}={}", self.rows[row][i])))
            .unwrap_or_default()
    }
}

#[derive(Default)]
struct Series {
    points: Vec<(f64, f64)>,
    bars: Vec<(f64, f64, f64)>,
    line: Vec<(f64, f64)>,
}

pub fn plot_file(csv_path: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| CliError::MalformedCsv(format!("{}: {e}", csv_path.display())))?;
    let svg = render(&text, kind)?;
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => csv_path.with_extension(format!("{}.svg", kind.as_str())),
    };
    std::fs::write(&target, svg)?;
    Ok(target)
}

pub fn render(csv_text: &str, kind: PlotKind) -> Result<String, CliError> {
    let f = Frame::parse(csv_text)?;
    let mut series: BTreeMap<String, Series> = BTreeMap::new();
    let mut notes = Vec::new();
    let (x_label, y_label, log) = match kind {
        PlotKind::ConvergenceLoglog => {
            let (n, mc) = (f.require("n")?, f.require("mc")?);
            let pred = f.index("prediction");
            for r in 0..f.rows.len() {
                let (Some(x), Some(m)) = (f.num(r, n)?, f.num(r, mc)?) else { continue };
                let p = match pred {
                    Some(i) => f.num(r, i)?.unwrap_or(0.0),
                    None => 0.0,
                };
                let y = (m - p).abs();
                if y > 0.0 {
                    series.entry(f.group(r, &["t", "x"])).or_default().points.push((x, y));
                }
            }
            for (key, s) in &series {
                let (xs, ys): (Vec<f64>, Vec<f64>) = s.points.iter().copied().unzip();
                let slope = loglog_slope(&xs, &ys);
                if slope.is_finite() {
                    notes.push(format!("{} slope {slope:.3}", if key.is_empty() { "fit" } else { key }));
                }
            }
            let y = if pred.is_some() { "|mc − prediction|" } else { "|mc|" };
            ("n", y, true)
        }
        PlotKind::TProfile => {
            let (t, mc) = (f.require("t")?, f.require("mc")?);
            let (se, pred) = (f.index("se"), f.index("prediction"));
            for r in 0..f.rows.len() {
                let Some(x) = f.num(r, t)? else { continue };
                let s = series.entry(f.group(r, &["n"])).or_default();
                if let Some(m) = f.num(r, mc)? {
                    s.points.push((x, m));
                    if let Some(e) = se.map(|i| f.num(r, i)).transpose()?.flatten() {
                        s.bars.push((x, m - 2.0 * e, m + 2.0 * e));
                    }
                }
                if let Some(p) = pred.map(|i| f.num(r, i)).transpose()?.flatten() {
                    s.line.push((x, p));
                }
            }
            ("t", "Δ(t): mc ± 2se, prediction", false)
        }
        PlotKind::BoundVsMc => {
            let (n, mc, b) = (f.require("n")?, f.require("mc")?, f.require("bound")?);
            for r in 0..f.rows.len() {
                let Some(x) = f.num(r, n)? else { continue };
                let s = series.entry(f.group(r, &["t", "x"])).or_default();
                if let Some(m) = f.num(r, mc)?.filter(|m| *m != 0.0) {
                    s.points.push((x, m.abs()));
                }
                if let Some(v) = f.num(r, b)?.filter(|v| *v > 0.0) {
                    s.line.push((x, v));
                }
            }
            let missing = f.rows.len() - (0..f.rows.len()).filter(|&r| matches!(f.num(r, b), Ok(Some(_)))).count();
            if missing > 0 {
                notes.push(format!("{missing} rows without a valid bound"));
            }
            ("n", "|mc| (markers), bound (lines)", true)
        }
    };
    for s in series.values_mut() {
        s.line.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(Canvas::new(&series, log).draw(&series, kind.as_str(), x_label, y_label, &notes))
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let vals: Vec<f64> = values.filter(|v| v.is_finite() && (!log || *v > 0.0)).map(|v| if log { v.log10() } else { v }).collect();
        let (mut lo, mut hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b).step_by(step as usize).map(|e| (10f64.powi(e), format!("1e{e}"))).collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
            let mut out = Vec::new();
            let mut v = (self.lo / step).ceil() * step;
            while v <= self.hi {
                let v0 = if v.abs() < 1e-12 * step { 0.0 } else { v };
                out.push((v0, format!("{}", (v0 * 1e6).round() / 1e6)));
                v += step;
            }
            out
        }
    }
}

struct Canvas {
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(series: &BTreeMap<String, Series>, log: bool) -> Self {
        let xs = series.values().flat_map(|s| s.points.iter().chain(&s.line).map(|p| p.0));
        let ys = series
            .values()
            .flat_map(|s| s.points.iter().chain(&s.line).map(|p| p.1).chain(s.bars.iter().flat_map(|b| [b.1, b.2])));
        Self { x: Axis::fit(xs, log), y: Axis::fit(ys, log) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + self.x.unit(x) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - self.y.unit(y) * (H - TOP - BOTTOM)
    }

    fn draw(&self, series: &BTreeMap<String, Series>, title: &str, xl: &str, yl: &str, notes: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{LEFT}" y="22" font-size="15">{}</text>"#, esc(title));
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
        for (v, label) in self.x.ticks() {
            let p = self.px(v);
            let _ = writeln!(s, r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{}" stroke="#ccc"/><text x="{p:.2}" y="{}" text-anchor="middle">{label}</text>"##, y1, y0 + 16.0);
        }
        for (v, label) in self.y.ticks() {
            let p = self.py(v);
            let _ = writeln!(s, r##"<line x1="{x0}" y1="{p:.2}" x2="{x1}" y2="{p:.2}" stroke="#ccc"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##, x0 - 6.0, p + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 18.0, esc(xl));
        let _ = writeln!(s, r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, esc(yl));
        let mut legend_y = TOP + 10.0;
        for (i, (key, ser)) in series.iter().enumerate() {
            let c = PALETTE[i % PALETTE.len()];
            for &(x, lo, hi) in &ser.bars {
                let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{c}"/>"#, self.px(x), self.py(lo), self.py(hi));
            }
            for &(x, y) in &ser.points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, self.px(x), self.py(y));
            }
            if ser.line.len() > 1 {
                let pts: Vec<String> = ser.line.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-dasharray="5,3"/>"#, pts.join(" "));
            }
            let label = if key.is_empty() { "all" } else { key.as_str() };
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{legend_y:.1}" r="4" fill="{c}"/><text x="{:.1}" y="{:.1}">{}</text>"#, x1 + 14.0, x1 + 24.0, legend_y + 4.0, esc(label));
            legend_y += 18.0;
        }
        for note in notes {
            legend_y += 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{legend_y:.1}">{}</text>"#, x1 + 10.0, esc(note));
            legend_y += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
