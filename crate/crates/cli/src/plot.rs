//! Energy decay plots as standalone SVG.

use std::fmt::Write as _;

/// Horizontal axis of a decay plot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeAxis {
    /// `ln t`, for power bounds.
    Log,
    /// `ln ln(1 + t)`, for logarithmic bounds.
    LogLog,
}

impl TimeAxis {
    fn map(&self, t: f64) -> Option<f64> {
        let x = match self {
            TimeAxis::Log => t.ln(),
            TimeAxis::LogLog => t.ln_1p().ln(),
        };
        x.is_finite().then_some(x)
    }

    fn label(&self) -> &'static str {
        match self {
            TimeAxis::Log => "ln t",
            TimeAxis::LogLog => "ln ln(1 + t)",
        }
    }
}

/// One curve of `(t, value)` samples.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Renders `ln value` against the chosen time axis. Samples with `t <= 0` or
/// nonpositive values are skipped. `timestamp`, when given, is written as a
/// comment and is the only nondeterministic content.
pub fn decay_svg(title: &str, axis: TimeAxis, series: &[Series], timestamp: Option<u64>) -> String {
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(t, v)| *t > 0.0 && *v > 0.0)
                .filter_map(|(t, v)| Some((axis.map(*t)?, v.ln())))
                .filter(|(_, y)| y.is_finite())
                .collect();
            thin(pts)
        })
        .collect();
    let all = mapped.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x0 < x1) {
        (x0, x1) = (x0.min(0.0) - 1.0, x1.max(0.0) + 1.0);
    }
    if !(y0 < y1) {
        (y0, y1) = (y0.min(0.0) - 1.0, y1.max(0.0) + 1.0);
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    if let Some(ts) = timestamp {
        let _ = writeln!(out, "<!-- generated at unix time {ts} -->");
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.2}</text>"#,
            sx(xv),
            bottom + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{yv:.2}</text>"#,
            left - 6.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        axis.label()
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {:.1})">ln E</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (k, (s, pts)) in series.iter().zip(&mapped).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if pts.len() >= 2 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = top + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            right - 8.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Keeps at most [`MAX_POINTS`] samples, evenly spaced in the plotted `x`.
fn thin(pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if pts.len() <= MAX_POINTS {
        return pts;
    }
    let (a, b) = (pts[0].0, pts[pts.len() - 1].0);
    let mut out = Vec::with_capacity(MAX_POINTS);
    let mut next = a;
    let step = (b - a) / (MAX_POINTS - 1) as f64;
    for p in &pts {
        if p.0 >= next {
            out.push(*p);
            next = p.0 + step;
        }
    }
    if out.last() != pts.last() {
        out.push(pts[pts.len() - 1]);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
