//! Minimal SVG figures: axes, tick labels and polylines or markers.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use sparse_omm::solvers::IterateTrace;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// `log10(E - E_ref)` against iteration, from a solver trace CSV.
    Trace,
    /// Per-entry nonzero counts (`row,col,count`, optionally prefixed by `L`).
    Heatmap,
    /// Ensemble excesses per trial, one series per method and `mu`.
    Scatter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceSeries {
    Emu,
    E0,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    markers: bool,
}

struct Figure {
    title: String,
    xlabel: String,
    ylabel: String,
    series: Vec<Series>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn render(&self) -> Result<String, CliError> {
        let all = || self.series.iter().flat_map(|s| s.points.iter().copied());
        if all().next().is_none() {
            return Err(CliError::Schema("nothing to plot".into()));
        }
        let (x0, x1) = bounds(all().map(|p| p.0));
        let (y0, y1) = bounds(all().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )
        .unwrap();
        writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&self.title))
            .unwrap();
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        writeln!(svg, r#"<polyline class="axes" points="{l},{t} {l},{b} {r},{b}" fill="none" stroke="black"/>"#).unwrap();
        for (v, anchor, x) in [(x0, "start", l), (x1, "end", r)] {
            writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-size="11">{}</text>"#, b + 16.0, tick(v)).unwrap();
        }
        for (v, y) in [(y0, b), (y1, t)] {
            writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{}</text>"#, l - 6.0, tick(v)).unwrap();
        }
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 18.0, escape(&self.xlabel))
            .unwrap();
        writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.ylabel)
        )
        .unwrap();

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            if s.markers {
                writeln!(svg, r#"<g class="series" fill="{color}">"#).unwrap();
                for &(x, y) in &s.points {
                    writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, sx(x), sy(y)).unwrap();
                }
                writeln!(svg, "</g>").unwrap();
            } else {
                let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                writeln!(svg, r#"<polyline class="series" points="{}" fill="none" stroke="{color}"/>"#, pts.join(" ")).unwrap();
            }
            let ly = t + 14.0 * (i as f64 + 1.0);
            writeln!(svg, r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#, r - 150.0, escape(&s.name)).unwrap();
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Error curve of a trace: `log10(E - ref)` with `ref` just below the
/// smallest value, so the last point stays finite.
pub fn trace_svg(text: &str, series: TraceSeries) -> Result<String, CliError> {
    let trace = IterateTrace::read_csv(text.as_bytes())?;
    if trace.is_empty() {
        return Err(CliError::Schema("trace has no iterations".into()));
    }
    let values: Vec<(f64, f64)> = trace
        .records
        .iter()
        .map(|r| (r.iter as f64, if series == TraceSeries::Emu { r.emu } else { r.e0 }))
        .collect();
    let (lo, hi) = bounds(values.iter().map(|p| p.1));
    let floor = ((hi - lo) * 1e-6).max(1e-14 * (1.0 + lo.abs()));
    let reference = lo - floor;
    let name = if series == TraceSeries::Emu { "E_mu" } else { "E_0" };
    Figure {
        title: format!("{name} error"),
        xlabel: "iteration".into(),
        ylabel: format!("log10({name} - min + {floor:.1e})"),
        series: vec![Series {
            name: name.into(),
            points: values.into_iter().map(|(x, v)| (x, (v - reference).log10())).collect(),
            markers: false,
        }],
    }
    .render()
}

fn columns(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>, CliError> {
    wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| CliError::Schema(format!("missing column `{w}`")))
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, CliError> {
    let s = rec.get(i).unwrap_or("");
    s.parse().map_err(|_| CliError::Schema(format!("cannot parse `{s}`")))
}

/// Counts as an `N x m` grid of cells. With an `L` column, `group` picks the
/// run (default: the first one listed).
pub fn heatmap_svg(text: &str, group: Option<&str>) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let idx = columns(&headers, &["row", "col", "count"])?;
    let group_col = headers.iter().position(|h| h == "L");
    let mut cells = Vec::new();
    let mut chosen = group.map(str::to_string);
    for rec in reader.records() {
        let rec = rec?;
        if let Some(g) = group_col {
            let value = rec.get(g).unwrap_or("").to_string();
            let want = chosen.get_or_insert_with(|| value.clone());
            if *want != value {
                continue;
            }
        }
        cells.push((field::<usize>(&rec, idx[0])?, field::<usize>(&rec, idx[1])?, field::<f64>(&rec, idx[2])?));
    }
    if cells.is_empty() {
        return Err(CliError::Schema("no counter rows".into()));
    }
    let rows = cells.iter().map(|c| c.0).max().unwrap() + 1;
    let cols = cells.iter().map(|c| c.1).max().unwrap() + 1;
    let peak = cells.iter().map(|c| c.2).fold(0.0, f64::max).max(1.0);
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let (cw, ch) = (w / cols as f64, h / rows as f64);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-rows="{rows}" data-cols="{cols}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let title = match &chosen {
        Some(g) => format!("nonzero counts, L = {g}"),
        None => "nonzero counts".into(),
    };
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&title)).unwrap();
    for (r, c, v) in &cells {
        let shade = 255.0 * (1.0 - v / peak);
        writeln!(
            svg,
            r#"<rect class="cell" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({shade:.0},{shade:.0},255)"/>"#,
            MARGIN + *c as f64 * cw,
            MARGIN + *r as f64 * ch,
            cw,
            ch
        )
        .unwrap();
    }
    writeln!(svg, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">column (of {cols})</text>"#, WIDTH / 2.0, HEIGHT - 20.0)
        .unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="12">row (of {rows})</text>"#, MARGIN - 6.0, MARGIN - 6.0)
        .unwrap();
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// `log10(excess)` per trial from a local-minima CSV.
pub fn scatter_svg(text: &str) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let idx = columns(&headers, &["trial", "method", "mu", "excess"])?;
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let method = rec.get(idx[1]).unwrap_or("");
        let mu = rec.get(idx[2]).unwrap_or("");
        let name = if mu.is_empty() { method.to_string() } else { format!("{method} mu={mu}") };
        let excess: f64 = field(&rec, idx[3])?;
        groups.entry(name).or_default().push((field(&rec, idx[0])?, excess.max(1e-16).log10()));
    }
    Figure {
        title: "final energy above the minimum".into(),
        xlabel: "trial".into(),
        ylabel: "log10(E - min E)".into(),
        series: groups.into_iter().map(|(name, points)| Series { name, points, markers: true }).collect(),
    }
    .render()
}

pub fn render(kind: PlotKind, input: &Path, series: TraceSeries, group: Option<&str>) -> Result<String, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    match kind {
        PlotKind::Trace => trace_svg(&text, series),
        PlotKind::Heatmap => heatmap_svg(&text, group),
        PlotKind::Scatter => scatter_svg(&text),
    }
}
