//! Results tables and layer curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentResult, LayerScore};
use crate::features::FeatureKind;
use crate::task::Task;

/// Cell text for a (method, task) pair without a result.
pub const MISSING_CELL: &str = "\u{2014}";
/// Entries required per task in a layer curve.
pub const CURVE_LAYERS: usize = 12;

const METHODS: [FeatureKind; 2] = [FeatureKind::Functionals, FeatureKind::Embedding];

/// Rounds half up to one decimal, deciding on the shortest decimal
/// representation of `v` so that 78.05 gives "78.1" even though the nearest
/// double lies just below it.
pub fn format_one_decimal(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let negative = v < 0.0;
    let text = format!("{}", v.abs());
    let (int_part, frac) = text.split_once('.').unwrap_or((&text, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac.bytes().map(|b| b - b'0').collect();
    digits.push(frac.first().copied().unwrap_or(0));
    if frac.get(1).is_some_and(|d| *d >= 5) {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let (int_digits, last) = digits.split_at(digits.len() - 1);
    let int_text: String = int_digits.iter().map(|d| char::from(b'0' + d)).collect();
    let sign = if negative && digits.iter().any(|d| *d != 0) { "-" } else { "" };
    format!("{sign}{int_text}.{}", last[0])
}

/// "mean±std" with one decimal each.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{}±{}", format_one_decimal(mean), format_one_decimal(std))
}

/// Methods × tasks accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub tasks: Vec<Task>,
    /// `(mean, std)` per method and task, in percent.
    pub cells: BTreeMap<FeatureKind, BTreeMap<Task, (f64, f64)>>,
}

impl ResultsTable {
    pub fn cell(&self, kind: FeatureKind, task: Task) -> String {
        self.cells
            .get(&kind)
            .and_then(|row| row.get(&task))
            .map_or_else(|| MISSING_CELL.to_owned(), |(m, s)| format_cell(*m, *s))
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut rows = vec![std::iter::once("method".to_owned())
            .chain(self.tasks.iter().map(|t| t.to_string()))
            .collect::<Vec<_>>()];
        for kind in METHODS {
            rows.push(
                std::iter::once(kind.to_string())
                    .chain(self.tasks.iter().map(|t| self.cell(kind, *t)))
                    .collect(),
            );
        }
        let ncol = rows[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// `method,<task>...` with the same cell text as [`Self::to_text`].
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("method".to_owned()).chain(self.tasks.iter().map(|t| t.to_string())))?;
        for kind in METHODS {
            w.write_record(std::iter::once(kind.to_string()).chain(self.tasks.iter().map(|t| self.cell(kind, *t))))?;
        }
        csv_text(w)
    }

    /// Unformatted `method,task,mean,std` rows for every present cell.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "task", "mean", "std"])?;
        for (kind, row) in &self.cells {
            for (task, (m, s)) in row {
                w.write_record([kind.to_string(), task.to_string(), m.to_string(), s.to_string()])?;
            }
        }
        csv_text(w)
    }
}

fn csv_text(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

/// Builds the table; columns are the tasks present, in canonical order. A
/// later result for the same method and task replaces an earlier one.
pub fn render_results_table(results: &[ExperimentResult]) -> ResultsTable {
    let mut cells: BTreeMap<FeatureKind, BTreeMap<Task, (f64, f64)>> = BTreeMap::new();
    for r in results {
        if cells.entry(r.kind).or_default().insert(r.task, (r.mean, r.std)).is_some() {
            log::warn!("duplicate {} {} result; keeping the last", r.kind, r.task);
        }
    }
    let tasks = Task::ALL
        .into_iter()
        .filter(|t| cells.values().any(|row| row.contains_key(t)))
        .collect();
    ResultsTable { tasks, cells }
}

/// CSV and SVG renderings of per-layer accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCurve {
    pub csv: String,
    pub svg: String,
}

/// Requires exactly one score for each of layers 1-12 per task.
pub fn emit_layer_curve(sweeps: &BTreeMap<Task, Vec<LayerScore>>) -> Result<LayerCurve> {
    if sweeps.is_empty() {
        return Err(Error::invalid("no layer sweeps to plot"));
    }
    let mut sorted: BTreeMap<Task, Vec<LayerScore>> = BTreeMap::new();
    for (task, scores) in sweeps {
        let mut s = scores.clone();
        s.sort_by_key(|x| x.layer);
        let layers: Vec<usize> = s.iter().map(|x| x.layer).collect();
        if layers != (1..=CURVE_LAYERS).collect::<Vec<_>>() {
            return Err(Error::invalid(format!(
                "{task}: layer curve needs layers 1-{CURVE_LAYERS} once each, got {layers:?}"
            )));
        }
        sorted.insert(*task, s);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "layer", "mean", "std"])?;
    for (task, scores) in &sorted {
        for s in scores {
            w.write_record([task.to_string(), s.layer.to_string(), s.mean.to_string(), s.std.to_string()])?;
        }
    }
    Ok(LayerCurve {
        csv: csv_text(w)?,
        svg: layer_svg(&sorted),
    })
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn layer_svg(sweeps: &BTreeMap<Task, Vec<LayerScore>>) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 130.0, 20.0, 50.0);
    let lo = sweeps
        .values()
        .flatten()
        .map(|s| s.mean)
        .fold(f64::INFINITY, f64::min);
    let y_min = ((lo / 10.0).floor() * 10.0).clamp(0.0, 90.0);
    let y_max = 100.0;
    let px = |layer: f64| left + (layer - 1.0) / (CURVE_LAYERS as f64 - 1.0) * (w - left - right);
    let py = |acc: f64| top + (y_max - acc.clamp(y_min, y_max)) / (y_max - y_min) * (h - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        h - bottom,
        w - right,
        h - bottom,
        h - bottom
    );
    for layer in 1..=CURVE_LAYERS {
        let x = px(layer as f64);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{layer}</text>"#, h - bottom + 16.0);
    }
    let mut tick = y_min;
    while tick <= y_max + 1e-9 {
        let y = py(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{tick}</text>"##,
            w - right,
            left - 6.0,
            y + 4.0
        );
        tick += 10.0;
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">layer</text>"#, (left + w - right) / 2.0, h - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">accuracy (%)</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for (i, (task, scores)) in sweeps.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = scores.iter().map(|s| format!("{:.1},{:.1}", px(s.layer as f64), py(s.mean))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        if let Some(best) = scores.iter().reduce(|a, b| if b.mean > a.mean { b } else { a }) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{color}" data-task="{task}" data-layer="{}"/>"#,
                px(best.layer as f64),
                py(best.mean),
                best.layer
            );
        }
        let ly = top + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{task}</text>"#,
            w - right + 10.0,
            w - right + 30.0,
            w - right + 36.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
