//! Self-contained SVG charts for quick inspection.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
    pub color: &'a str,
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, x: (f64, f64), y: (f64, f64), y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">{}</text>"#, y0 + 15.0, fmt_tick(x.0));
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 15.0, fmt_tick(x.1));
    let _ = writeln!(s, r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#, x0 - 4.0, y_label_tick(y.0, y_label));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 4.0, y_label_tick(y.1, y_label));
}

fn y_label_tick(v: f64, kind: &str) -> String {
    if kind == "log" {
        format!("1e{}", v.round())
    } else {
        fmt_tick(v)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{v}")
    } else {
        format!("{v:.3}")
    }
}

fn scale(v: f64, from: (f64, f64), to: (f64, f64)) -> f64 {
    if from.1 == from.0 {
        return (to.0 + to.1) / 2.0;
    }
    to.0 + (v - from.0) / (from.1 - from.0) * (to.1 - to.0)
}

/// Bar chart of a pmf; `overlay` draws a comparison curve on top.
pub fn bar_chart(title: &str, bars: &[(i64, f64)], overlay: Option<Series<'_>>) -> String {
    let mut s = header(title);
    let x_lo = bars.iter().map(|b| b.0).min().unwrap_or(0) as f64 - 0.5;
    let x_hi = bars.iter().map(|b| b.0).max().unwrap_or(0) as f64 + 0.5;
    let mut y_hi = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
    if let Some(o) = &overlay {
        y_hi = o.points.iter().map(|p| p.1).fold(y_hi, f64::max);
    }
    let y_hi = if y_hi > 0.0 { y_hi * 1.05 } else { 1.0 };
    let xs = (MARGIN, WIDTH - MARGIN / 2.0);
    let ys = (HEIGHT - MARGIN, MARGIN);
    axes(&mut s, (x_lo, x_hi), (0.0, y_hi), "lin");
    let bar_w = (xs.1 - xs.0) / (x_hi - x_lo);
    for &(n, p) in bars {
        let x = scale(n as f64 - 0.5, (x_lo, x_hi), xs);
        let y = scale(p, (0.0, y_hi), ys);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="steelblue"/>"#,
            (bar_w * 0.9).max(0.5),
            ys.0 - y
        );
    }
    if let Some(o) = overlay {
        polyline(&mut s, &o, (x_lo, x_hi), (0.0, y_hi), xs, ys);
        legend(&mut s, &[&o]);
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart; with `log_y` the values are plotted as log10 (non-positive
/// points are dropped).
pub fn line_chart(title: &str, series: &[Series<'_>], log_y: bool) -> String {
    let mut s = header(title);
    let transformed: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|sr| {
            sr.points
                .iter()
                .filter(|p| !log_y || p.1 > 0.0)
                .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
                .collect()
        })
        .collect();
    let all = transformed.iter().flatten();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if x_lo > x_hi {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    if log_y {
        y_lo = y_lo.floor();
        y_hi = y_hi.ceil();
    }
    let xs = (MARGIN, WIDTH - MARGIN / 2.0);
    let ys = (HEIGHT - MARGIN, MARGIN);
    axes(&mut s, (x_lo, x_hi), (y_lo, y_hi), if log_y { "log" } else { "lin" });
    let mut shown = Vec::new();
    for (sr, pts) in series.iter().zip(&transformed) {
        let t = Series {
            label: sr.label,
            points: pts,
            color: sr.color,
        };
        polyline(&mut s, &t, (x_lo, x_hi), (y_lo, y_hi), xs, ys);
        shown.push(sr);
    }
    legend(&mut s, &shown);
    s.push_str("</svg>\n");
    s
}

fn polyline(
    s: &mut String,
    sr: &Series<'_>,
    x: (f64, f64),
    y: (f64, f64),
    xs: (f64, f64),
    ys: (f64, f64),
) {
    let mut pts = String::new();
    for &(px, py) in sr.points {
        let _ = write!(pts, "{:.2},{:.2} ", scale(px, x, xs), scale(py, y, ys));
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        pts.trim_end(),
        sr.color
    );
}

fn legend(s: &mut String, series: &[&Series<'_>]) {
    for (i, sr) in series.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN - 120.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 16.0,
            sr.color,
            x + 20.0,
            y + 4.0,
            escape(sr.label)
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_chart_is_well_formed() {
        let svg = bar_chart("p <n>", &[(-1, 0.2), (0, 0.5), (1, 0.3)], None);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("p &lt;n&gt;"));
    }

    #[test]
    fn log_chart_drops_nonpositive() {
        let pts = [(0.0, 1.0), (1.0, 0.0), (2.0, 1e-3)];
        let svg = line_chart(
            "l2",
            &[Series {
                label: "l2",
                points: &pts,
                color: "black",
            }],
            true,
        );
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }
}
