//! Static SVG figures of a finished run: the cognitive map, the active view
//! index over time, and the translational error over time.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bioslam::experience_map::{Experience, Transition};
use bioslam::io::{read_edges, read_nodes, read_report_log, ReportRecord};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

pub fn plot(dir: &Path) -> Result<()> {
    let report = read_report_log(&dir.join("report.txt"))?;
    if report.is_empty() {
        bail!("{}: report log is empty", dir.join("report.txt").display());
    }
    let nodes = read_nodes(&dir.join("nodes.txt"))?;
    let edges = read_edges(&dir.join("edges.txt"))?;
    write(&dir.join("map.svg"), &map_svg(&nodes, &edges)?)?;
    write(&dir.join("views.svg"), &views_svg(&report))?;
    write(&dir.join("error.svg"), &error_svg(&report))?;
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Data-to-pixel mapping for one plot area.
struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    area: (f64, f64, f64, f64),
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            x: widen(x),
            y: widen(y),
            area: (MARGIN, MARGIN / 2.0, W - MARGIN / 2.0, H - MARGIN),
        }
    }

    /// Shrinks the plot area so that one data unit is as long on both axes.
    fn equal_aspect(mut self) -> Self {
        let (l, t, r, b) = self.area;
        let sx = (r - l) / (self.x.1 - self.x.0);
        let sy = (b - t) / (self.y.1 - self.y.0);
        let s = sx.min(sy);
        let (w, h) = (s * (self.x.1 - self.x.0), s * (self.y.1 - self.y.0));
        let (cx, cy) = ((l + r) / 2.0, (t + b) / 2.0);
        self.area = (cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0);
        self
    }

    fn px(&self, x: f64) -> f64 {
        let (l, _, r, _) = self.area;
        l + (x - self.x.0) / (self.x.1 - self.x.0) * (r - l)
    }

    fn py(&self, y: f64) -> f64 {
        let (_, t, _, b) = self.area;
        b - (y - self.y.0) / (self.y.1 - self.y.0) * (b - t)
    }

    fn frame(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, t, r, b) = self.area;
        writeln!(
            svg,
            r#"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        )
        .unwrap();
        for v in ticks(self.x) {
            let x = self.px(v);
            writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{b:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                b + 4.0
            )
            .unwrap();
            writeln!(
                svg,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                b + 16.0,
                label(v)
            )
            .unwrap();
        }
        for v in ticks(self.y) {
            let y = self.py(v);
            writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{l:.1}" y2="{y:.1}" stroke="black"/>"#,
                l - 4.0
            )
            .unwrap();
            writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                l - 6.0,
                y + 4.0,
                label(v)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
            (l + r) / 2.0,
            H - 8.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="16" text-anchor="middle">{title}</text>"#,
            W / 2.0
        )
        .unwrap();
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(0.5);
    (lo - pad, hi + pad)
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Round tick positions, about five per axis.
fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

/// Experiences as circles joined by their transitions, one unit per metre.
fn map_svg(nodes: &[Experience], edges: &[Transition]) -> Result<String> {
    let mut svg = open();
    let axes = Axes::new(
        range(nodes.iter().map(|n| n.pose.x)),
        range(nodes.iter().map(|n| n.pose.y)),
    )
    .equal_aspect();
    axes.frame(&mut svg, "Experience map", "x (m)", "y (m)");
    let pos = |id: usize| -> Result<(f64, f64)> {
        let n = nodes
            .get(id)
            .with_context(|| format!("edge refers to missing node {id}"))?;
        Ok((axes.px(n.pose.x), axes.py(n.pose.y)))
    };
    svg.push_str("<g stroke=\"#8a8a8a\" stroke-width=\"0.8\">\n");
    for e in edges {
        let ((x1, y1), (x2, y2)) = (pos(e.from_id)?, pos(e.to_id)?);
        writeln!(
            svg,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#
        )
        .unwrap();
    }
    svg.push_str("</g>\n<g fill=\"#1f5fa8\">\n");
    for n in nodes {
        let (x, y) = (axes.px(n.pose.x), axes.py(n.pose.y));
        writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6"/>"#).unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Active local view index at every step.
fn views_svg(report: &[ReportRecord]) -> String {
    let mut svg = open();
    let axes = Axes::new(
        range(report.iter().map(|r| r.t)),
        range(report.iter().map(|r| r.active_view as f64)),
    );
    axes.frame(&mut svg, "Active local view", "time (s)", "view index");
    svg.push_str(
        "<path fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" stroke-linecap=\"round\" d=\"",
    );
    for r in report {
        write!(
            svg,
            "M{:.2} {:.2}h0.01",
            axes.px(r.t),
            axes.py(r.active_view as f64)
        )
        .unwrap();
    }
    svg.push_str("\"/>\n</svg>\n");
    svg
}

/// Translational error over time, loop closures marked along the bottom.
fn error_svg(report: &[ReportRecord]) -> String {
    let mut svg = open();
    let e = range(report.iter().map(|r| r.err));
    let mut axes = Axes::new(range(report.iter().map(|r| r.t)), (0.0, 1.0));
    if e.1 > 0.0 {
        axes.y = (0.0, e.1 * 1.05);
    }
    axes.frame(&mut svg, "Translational error", "time (s)", "error (m)");
    if !e.1.is_finite() {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no ground truth</text>"#,
            W / 2.0,
            H / 2.0
        )
        .unwrap();
    } else {
        svg.push_str("<polyline fill=\"none\" stroke=\"#c03020\" stroke-width=\"1\" points=\"");
        for r in report.iter().filter(|r| r.err.is_finite()) {
            write!(svg, "{:.2},{:.2} ", axes.px(r.t), axes.py(r.err)).unwrap();
        }
        svg.push_str("\"/>\n");
    }
    let base = axes.area.3;
    svg.push_str("<g stroke=\"#2a8a3a\">\n");
    for r in report.iter().filter(|r| r.loop_closed) {
        let x = axes.px(r.t);
        writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{base:.1}" x2="{x:.2}" y2="{:.1}"/>"#,
            base - 6.0
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
