//! Rothman diagrams as standalone SVG text.
//!
//! Each panel maps the unit square onto its plotting region with risk
//! increasing upward. Panel groups carry `data-x0`/`data-y0` (pixel position
//! of risk 0) and `data-x1`/`data-y1` (risk 1) so coordinates can be read
//! back from the document.

pub mod figures;

use std::fmt::Write as _;

use crate::geometry::{ConfoundingRectangle, PointTag, RiskPoint};
use crate::measures::{contour, Measure};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas {
            width: 600.0,
            height: 600.0,
            margin: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStyle {
    OpenCircle,
    SolidCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMark {
    pub point: RiskPoint,
    pub style: PointStyle,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Segment((f64, f64), (f64, f64)),
    Polygon(Vec<(f64, f64)>),
    Rectangle(ConfoundingRectangle),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMark {
    pub shape: Shape,
    pub style: LineStyle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourMark {
    pub measure: Measure,
    pub value: f64,
    pub style: LineStyle,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramSpec {
    pub canvas: Canvas,
    pub title: Option<String>,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<PointMark>,
    pub shapes: Vec<ShapeMark>,
    pub contours: Vec<ContourMark>,
}

impl Default for DiagramSpec {
    fn default() -> Self {
        DiagramSpec {
            canvas: Canvas::default(),
            title: None,
            x_label: "Risk in the unexposed".into(),
            y_label: "Risk in the exposed".into(),
            points: Vec::new(),
            shapes: Vec::new(),
            contours: Vec::new(),
        }
    }
}

impl DiagramSpec {
    pub fn point(mut self, point: RiskPoint, style: PointStyle, label: impl Into<String>) -> Self {
        self.points.push(PointMark {
            point,
            style,
            label: label.into(),
        });
        self
    }

    pub fn shape(mut self, shape: Shape, style: LineStyle) -> Self {
        self.shapes.push(ShapeMark { shape, style });
        self
    }

    pub fn contour(mut self, measure: Measure, value: f64, style: LineStyle, label: impl Into<String>) -> Self {
        self.contours.push(ContourMark {
            measure,
            value,
            style,
            label: label.into(),
        });
        self
    }

    pub fn titled(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }
}

/// Several panels laid out on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub panels: Vec<DiagramSpec>,
    pub columns: usize,
}

impl Figure {
    pub fn single(panel: DiagramSpec) -> Self {
        Figure {
            panels: vec![panel],
            columns: 1,
        }
    }
}

/// Number of x-values at which a contour is sampled.
pub const CONTOUR_SAMPLES: usize = 400;

/// Pixel mapping for one panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Transform {
    pub fn new(canvas: &Canvas, left: f64, top: f64) -> Self {
        Transform {
            x0: left + canvas.margin,
            x1: left + canvas.width - canvas.margin,
            y0: top + canvas.height - canvas.margin,
            y1: top + canvas.margin,
        }
    }

    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x0 + x * (self.x1 - self.x0), self.y0 + y * (self.y1 - self.y0))
    }

    pub fn risk(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.x0) / (self.x1 - self.x0), (py - self.y0) / (self.y1 - self.y0))
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn dash(style: LineStyle) -> &'static str {
    match style {
        LineStyle::Solid => "",
        LineStyle::Dashed => r#" stroke-dasharray="6 4""#,
    }
}

fn point_class(tag: &PointTag) -> &'static str {
    match tag {
        PointTag::Crude => "crude",
        PointTag::Stratum(_) => "stratum",
        PointTag::Standardized(_) => "standardized",
        PointTag::Causal(_) => "causal",
    }
}

/// Contour sampled on a grid of x-values, split into runs where it leaves
/// the square; each exit is located by bisection so runs end on the border.
pub fn contour_runs(m: Measure, value: f64, samples: usize) -> Vec<Vec<(f64, f64)>> {
    let at = |x: f64| contour(m, value, x);
    let edge = |inside: f64, outside: f64| {
        let (mut a, mut b) = (inside, outside);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if at(mid).is_some() {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };
    let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    let mut prev: Option<(f64, bool)> = None;
    for i in 0..=samples {
        let x = i as f64 / samples as f64;
        let y = at(x);
        match (prev, y) {
            (Some((px, false)), Some(_)) => {
                let e = edge(x, px);
                current.push((e, at(e).expect("bisection keeps the defined end")));
            }
            (Some((px, true)), None) => {
                let e = edge(px, x);
                current.push((e, at(e).expect("bisection keeps the defined end")));
                runs.push(std::mem::take(&mut current));
            }
            _ => {}
        }
        if let Some(y) = y {
            current.push((x, y));
        }
        prev = Some((x, y.is_some()));
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.retain(|r| r.len() >= 2);
    runs
}

fn draw_axes(out: &mut String, t: &Transform, spec: &DiagramSpec) {
    let (left, top) = t.px(0.0, 1.0);
    let size = (t.x1 - t.x0, t.y0 - t.y1);
    let _ = writeln!(
        out,
        r#"    <rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(left),
        num(top),
        num(size.0),
        num(size.1)
    );
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let (x, y0) = t.px(v, 0.0);
        let (x0, y) = t.px(0.0, v);
        let _ = writeln!(
            out,
            r#"    <line class="tick" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            num(x),
            num(y0),
            num(x),
            num(y0 + 5.0)
        );
        let _ = writeln!(
            out,
            r#"    <text class="tick-label" x="{}" y="{}" text-anchor="middle" font-size="11">{v:.1}</text>"#,
            num(x),
            num(y0 + 18.0)
        );
        let _ = writeln!(
            out,
            r#"    <line class="tick" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            num(x0 - 5.0),
            num(y),
            num(x0),
            num(y)
        );
        let _ = writeln!(
            out,
            r#"    <text class="tick-label" x="{}" y="{}" text-anchor="end" font-size="11">{v:.1}</text>"#,
            num(x0 - 8.0),
            num(y + 4.0)
        );
    }
    let (cx, bottom) = t.px(0.5, 0.0);
    let _ = writeln!(
        out,
        r#"    <text class="axis-label" x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        num(cx),
        num(bottom + 38.0),
        escape(&spec.x_label)
    );
    let (lx, cy) = t.px(0.0, 0.5);
    let (ax, ay) = (lx - 42.0, cy);
    let _ = writeln!(
        out,
        r#"    <text class="axis-label" x="{}" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 {} {})">{}</text>"#,
        num(ax),
        num(ay),
        num(ax),
        num(ay),
        escape(&spec.y_label)
    );
    if let Some(title) = &spec.title {
        let (_, y) = t.px(0.5, 1.0);
        let _ = writeln!(
            out,
            r#"    <text class="title" x="{}" y="{}" text-anchor="middle" font-size="15">{}</text>"#,
            num(cx),
            num(y - 20.0),
            escape(title)
        );
    }
}

fn polyline(out: &mut String, t: &Transform, pts: &[(f64, f64)], class: &str, style: LineStyle, stroke: &str, extra: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (px, py) = t.px(x, y);
            format!("{},{}", num(px), num(py))
        })
        .collect();
    let _ = writeln!(
        out,
        r#"    <polyline class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{}{extra}/>"#,
        coords.join(" "),
        dash(style)
    );
}

fn draw_panel(out: &mut String, spec: &DiagramSpec, left: f64, top: f64) {
    let t = Transform::new(&spec.canvas, left, top);
    let _ = writeln!(
        out,
        r#"  <g class="panel" data-x0="{}" data-y0="{}" data-x1="{}" data-y1="{}">"#,
        num(t.x0),
        num(t.y0),
        num(t.x1),
        num(t.y1)
    );
    draw_axes(out, &t, spec);

    let (ax, ay) = t.px(0.0, 0.0);
    let (bx, by) = t.px(1.0, 1.0);
    let _ = writeln!(
        out,
        r##"    <line class="null-line" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-width="2"/>"##,
        num(ax),
        num(ay),
        num(bx),
        num(by)
    );

    for c in &spec.contours {
        let runs = contour_runs(c.measure, c.value, CONTOUR_SAMPLES);
        let extra = format!(r#" data-measure="{}" data-value="{}""#, c.measure.abbreviation(), c.value);
        for run in &runs {
            polyline(out, &t, run, "contour", c.style, "#555555", &extra);
        }
        // label at the far end of the longest run
        if let Some(run) = runs.iter().max_by_key(|r| r.len()) {
            let &(x, y) = run.last().expect("runs are non-empty");
            let (px, py) = t.px(x, y);
            let _ = writeln!(
                out,
                r#"    <text class="contour-label" x="{}" y="{}" font-size="11">{}</text>"#,
                num(px + 3.0),
                num(py - 3.0),
                escape(&c.label)
            );
        }
    }

    for s in &spec.shapes {
        match &s.shape {
            Shape::Segment(a, b) => polyline(out, &t, &[*a, *b], "segment", s.style, "black", ""),
            Shape::Polygon(v) => {
                let mut closed = v.clone();
                if let Some(first) = v.first() {
                    closed.push(*first);
                }
                polyline(out, &t, &closed, "hull", s.style, "black", "");
            }
            Shape::Rectangle(r) => {
                let (x, y) = t.px(r.x_min, r.y_max);
                let (x2, y2) = t.px(r.x_max, r.y_min);
                let _ = writeln!(
                    out,
                    r#"    <rect class="rectangle" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1.5"{}/>"#,
                    num(x),
                    num(y),
                    num(x2 - x),
                    num(y2 - y),
                    dash(s.style)
                );
            }
        }
    }

    for p in &spec.points {
        let (cx, cy) = t.px(p.point.x, p.point.y);
        let fill = match p.style {
            PointStyle::OpenCircle => "white",
            PointStyle::SolidCircle => "black",
        };
        let _ = writeln!(
            out,
            r#"    <circle class="point {}" cx="{}" cy="{}" r="5" fill="{fill}" stroke="black" stroke-width="1.5" data-label="{}"/>"#,
            point_class(&p.point.tag),
            num(cx),
            num(cy),
            escape(p.point.label())
        );
        if !p.label.is_empty() {
            let _ = writeln!(
                out,
                r#"    <text class="point-label" x="{}" y="{}" font-size="12">{}</text>"#,
                num(cx + 8.0),
                num(cy + 4.0),
                escape(&p.label)
            );
        }
    }
    out.push_str("  </g>\n");
}

/// A complete SVG document for a figure.
pub fn render_figure(figure: &Figure) -> String {
    let columns = figure.columns.max(1);
    let rows = figure.panels.len().div_ceil(columns).max(1);
    let canvas = figure.panels.first().map(|p| p.canvas).unwrap_or_default();
    let (w, h) = (canvas.width * columns as f64, canvas.height * rows as f64);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        num(w),
        num(h),
        num(w),
        num(h)
    );
    let _ = writeln!(
        out,
        r#"  <rect class="background" x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        num(w),
        num(h)
    );
    for (i, panel) in figure.panels.iter().enumerate() {
        let (col, row) = (i % columns, i / columns);
        draw_panel(&mut out, panel, col as f64 * canvas.width, row as f64 * canvas.height);
    }
    out.push_str("</svg>\n");
    out
}

/// A one-panel document.
pub fn render_diagram(spec: &DiagramSpec) -> String {
    render_figure(&Figure::single(spec.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_diagram_has_frame_and_null_line() {
        let svg = render_diagram(&DiagramSpec::default());
        assert!(svg.contains(r#"class="null-line""#));
        assert!(svg.contains(r#"class="frame""#));
        assert!(!svg.contains("<circle"));
        assert_eq!(svg.matches(r#"class="tick-label""#).count(), 22);
        assert_eq!(svg, render_diagram(&DiagramSpec::default()));
    }

    #[test]
    fn transform_round_trips() {
        let t = Transform::new(&Canvas::default(), 600.0, 0.0);
        assert_eq!(t.px(0.0, 0.0), (660.0, 540.0));
        assert_eq!(t.px(1.0, 1.0), (1140.0, 60.0));
        let (x, y) = t.risk(t.px(0.3, 0.7).0, t.px(0.3, 0.7).1);
        assert!((x - 0.3).abs() < 1e-12 && (y - 0.7).abs() < 1e-12);
    }

    #[test]
    fn contours_stop_at_the_border() {
        let runs = contour_runs(Measure::RiskDifference, 0.25, CONTOUR_SAMPLES);
        assert_eq!(runs.len(), 1);
        let last = *runs[0].last().unwrap();
        assert!((last.0 - 0.75).abs() < 1e-12 && (last.1 - 1.0).abs() < 1e-12);
        assert!(runs[0].len() >= 200);
        let rr = contour_runs(Measure::RiskRatio, 2.0, CONTOUR_SAMPLES);
        assert!((rr[0].last().unwrap().0 - 0.5).abs() < 1e-12);
        for m in Measure::ALL {
            for v in [0.3, 0.9, 2.5] {
                let v = if m.is_ratio() { v } else { v - 1.0 };
                for run in contour_runs(m, v, CONTOUR_SAMPLES) {
                    assert!(run.iter().all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)));
                }
            }
        }
    }

    #[test]
    fn labels_are_escaped() {
        let p = RiskPoint::stratum(0.2, 0.3, "a<b").unwrap();
        let svg = render_diagram(&DiagramSpec::default().point(p, PointStyle::SolidCircle, "x & y"));
        assert!(svg.contains("a&lt;b") && svg.contains("x &amp; y"));
    }
}
