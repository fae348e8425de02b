//! Minimal deterministic SVG line plots from CSV tables.

use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Result, SenseError};

/// A parsed CSV table: one header row and string cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| SenseError::MalformedTable(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SenseError::MalformedTable(e.to_string()))?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SenseError::MalformedTable(format!("no column named {name:?}")))
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = row
                    .get(idx)
                    .ok_or_else(|| SenseError::MalformedTable(format!("row {} is short", i + 1)))?;
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| SenseError::MalformedTable(format!("row {}: {cell:?} is not a number", i + 1)))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_column: String,
    pub y_columns: Vec<String>,
    pub x_label: String,
    pub y_label: String,
    /// Plot log10(y); non-positive values are dropped.
    pub log_y: bool,
    pub width: f64,
    pub height: f64,
}

impl PlotSpec {
    pub fn new(title: &str, x_column: &str, y_columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            x_column: x_column.into(),
            y_columns: y_columns.iter().map(|s| s.to_string()).collect(),
            x_label: x_column.into(),
            y_label: String::new(),
            log_y: false,
            width: 640.0,
            height: 400.0,
        }
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }
}

pub const MARGIN_LEFT: f64 = 80.0;
pub const MARGIN_RIGHT: f64 = 150.0;
pub const MARGIN_TOP: f64 = 40.0;
pub const MARGIN_BOTTOM: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const DASHES: [&str; 6] = ["", "6,4", "2,3", "8,3,2,3", "1,2", "10,5"];

/// Maps data coordinates into the plot area of an SVG canvas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub width: f64,
    pub height: f64,
}

impl Frame {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), width: f64, height: f64) -> Self {
        Self {
            x_range: widen(x_range),
            y_range: widen(y_range),
            width,
            height,
        }
    }

    pub fn plot_width(&self) -> f64 {
        self.width - MARGIN_LEFT - MARGIN_RIGHT
    }

    pub fn plot_height(&self) -> f64 {
        self.height - MARGIN_TOP - MARGIN_BOTTOM
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let px = MARGIN_LEFT + (x - x0) / (x1 - x0) * self.plot_width();
        let py = MARGIN_TOP + self.plot_height() - (y - y0) / (y1 - y0) * self.plot_height();
        (px, py)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders the selected columns of `table` as polylines.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String> {
    let xs = table.numeric_column(&spec.x_column)?;
    let mut series = Vec::with_capacity(spec.y_columns.len());
    for name in &spec.y_columns {
        let ys = table.numeric_column(name)?;
        let points: Vec<(f64, f64)> = xs
            .iter()
            .zip(&ys)
            .filter_map(|(&x, &y)| {
                let y = if spec.log_y {
                    if y > 0.0 {
                        y.log10()
                    } else {
                        return None;
                    }
                } else {
                    y
                };
                (x.is_finite() && y.is_finite()).then_some((x, y))
            })
            .collect();
        series.push((name.as_str(), points));
    }
    let all = || series.iter().flat_map(|(_, p)| p.iter());
    let frame = Frame::new(
        range(all().map(|p| p.0)),
        range(all().map(|p| p.1)),
        spec.width,
        spec.height,
    );
    let mut svg = String::new();
    let (w, h) = (spec.width, spec.height);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + frame.plot_width() / 2.0,
        MARGIN_TOP / 2.0 + 5.0,
        escape(&spec.title)
    );
    let (left, top) = (MARGIN_LEFT, MARGIN_TOP);
    let (right, bottom) = (left + frame.plot_width(), top + frame.plot_height());
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        frame.plot_width(),
        frame.plot_height()
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x_range.0 + t * (frame.x_range.1 - frame.x_range.0);
        let yv = frame.y_range.0 + t * (frame.y_range.1 - frame.y_range.0);
        let (px, _) = frame.map(xv, frame.y_range.0);
        let (_, py) = frame.map(frame.x_range.0, yv);
        let _ = writeln!(
            svg,
            r#"<line x1="{px}" y1="{bottom}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 5.0,
            bottom + 18.0,
            tick_label(xv)
        );
        let label = if spec.log_y {
            format!("1e{}", tick_label(yv))
        } else {
            tick_label(yv)
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{py}" x2="{left}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + frame.plot_width() / 2.0,
        h - 10.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        top + frame.plot_height() / 2.0,
        top + frame.plot_height() / 2.0,
        escape(&spec.y_label)
    );
    for (i, (name, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[i % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        if !points.is_empty() {
            let coords: Vec<String> = points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = frame.map(x, y);
                    format!("{px:.3},{py:.3}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = top + 15.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash_attr}/><text x="{}" y="{}">{}</text>"#,
            right + 10.0,
            right + 35.0,
            right + 40.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
