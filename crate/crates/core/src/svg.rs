//! Self-contained SVG scatter plot of spectra in the complex plane.

use std::fmt::Write as _;

use num_complex::Complex64;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<Complex64>,
    pub marker: Marker,
    pub color: String,
}

impl Series {
    /// Blue circles, for spectra of the analytic operator.
    pub fn analytic(label: impl Into<String>, points: Vec<Complex64>) -> Self {
        Self { label: label.into(), points, marker: Marker::Circle, color: "blue".into() }
    }

    /// Red crosses, for spectra of sampled operators.
    pub fn sampled(label: impl Into<String>, points: Vec<Complex64>) -> Self {
        Self { label: label.into(), points, marker: Marker::Cross, color: "red".into() }
    }
}

/// 600×600 scatter with the unit circle as a guide. The axis range is
/// symmetric and covers the unit disk plus every finite point.
pub fn spectrum_scatter(title: &str, series: &[Series]) -> String {
    let extent = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(1.0_f64, f64::max)
        * 1.1;
    let scale = (SIZE - 2.0 * MARGIN) / (2.0 * extent);
    let px = |z: &Complex64| (SIZE / 2.0 + z.re * scale, SIZE / 2.0 - z.im * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    let c = SIZE / 2.0;
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{c}" x2="{}" y2="{c}" stroke="#999" stroke-width="1"/>"##,
        SIZE - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<line x1="{c}" y1="{MARGIN}" x2="{c}" y2="{}" stroke="#999" stroke-width="1"/>"##,
        SIZE - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<circle class="unit-circle" cx="{c}" cy="{c}" r="{}" fill="none" stroke="#666" stroke-dasharray="4 3"/>"##,
        scale
    );

    for ser in series {
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, escape(&ser.label));
        for z in ser.points.iter().filter(|z| z.re.is_finite() && z.im.is_finite()) {
            let (x, y) = px(z);
            marker(&mut s, ser.marker, &ser.color, x, y);
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, ser) in series.iter().enumerate() {
        let y = SIZE - MARGIN + 18.0 + 0.0 * i as f64;
        let x = MARGIN + 160.0 * i as f64;
        marker(&mut s, ser.marker, &ser.color, x, y);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 10.0,
            y + 4.0,
            escape(&ser.label)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn marker(s: &mut String, m: Marker, color: &str, x: f64, y: f64) {
    const R: f64 = 4.0;
    match m {
        Marker::Circle => {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{R}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            );
        }
        Marker::Cross => {
            let _ = writeln!(
                s,
                r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
                x - R,
                y - R,
                x + R,
                y + R,
                x - R,
                y + R,
                x + R,
                y - R
            );
        }
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
