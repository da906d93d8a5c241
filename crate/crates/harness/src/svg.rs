//! Snapshot figures: true contour, estimated contours and scan points.

use std::fmt::Write;

use gpett_core::Point;

/// A closed outline drawn with a stroke color.
pub struct Outline<'a> {
    pub label: &'a str,
    pub points: &'a [Point],
    pub color: &'a str,
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 0.5;

fn coord(v: f64) -> String {
    format!("{v:.4}")
}

/// SVG document in world coordinates (y up), scaled to fit every element.
pub fn render_snapshot(title: &str, outlines: &[Outline], scan: &[Point]) -> String {
    let all = outlines.iter().flat_map(|o| o.points.iter()).chain(scan);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (-1.0, -1.0, 1.0, 1.0);
    }
    let (x0, y0) = (x0 - MARGIN, y0 - MARGIN);
    let span = (x1 + MARGIN - x0).max(y1 + MARGIN - y0);
    let stroke = span / 300.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="{} {} {} {}">"#,
        coord(x0),
        coord(-(y0 + span)),
        coord(span),
        coord(span)
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<g transform="scale(1,-1)">"#);
    for o in outlines {
        let pts: Vec<String> = o
            .points
            .iter()
            .map(|p| format!("{},{}", coord(p[0]), coord(p[1])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="{}" points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            escape(o.label),
            pts.join(" "),
            o.color,
            coord(stroke)
        );
    }
    for p in scan {
        let _ = writeln!(
            s,
            r##"<circle class="scan" cx="{}" cy="{}" r="{}" fill="#222"/>"##,
            coord(p[0]),
            coord(p[1]),
            coord(2.0 * stroke)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
