//! Plot data: CSV tables and self-contained SVG line plots.

use std::fmt::Write as _;

/// One named series of `(x, y)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

/// CSV with the given header and full-precision rows.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_cell(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn format_cell(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.17e}")
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of one or more series. The y axis is logarithmic when `log_y`
/// is set and every finite value is positive; non-finite points are
/// dropped.
pub fn line_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let log = log_y && !finite.is_empty() && finite.iter().all(|p| p.1 > 0.0);
    let ty = |y: f64| if log { y.log10() } else { y };
    let bounds = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = bounds(finite.iter().map(|p| p.0).collect());
    let (y0, y1) = bounds(finite.iter().map(|p| ty(p.1)).collect());
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (ty(y) - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let tick = |v: f64| if log { format!("1e{v:.1}") } else { format!("{v:.3e}") };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="middle">{}</text>"#, H - PAD + 16.0, tick_x(x0));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W - PAD,
        H - PAD + 16.0,
        tick_x(x1)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, tick(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 4.0, tick(y1));

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log || *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            for p in &pts {
                let (cx, cy) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 140.0,
            PAD + 16.0 * i as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_x(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let csv = table_csv(&["k", "factor"], &[vec![1.0, 0.5], vec![2.0, 0.25]]);
        assert_eq!(csv.lines().next(), Some("k,factor"));
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("\n1,5.00000000000000000e-1\n"));
    }

    #[test]
    fn svg_is_self_contained() {
        let s = Series::new("a<b", vec![(1.0, 1e-3), (2.0, 1e-6), (3.0, f64::NAN)]);
        let svg = line_svg("t", "k", "factor", &[s], true);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("href"));
    }

    #[test]
    fn degenerate_inputs() {
        let svg = line_svg("e", "x", "y", &[Series::new("none", vec![])], false);
        assert!(svg.contains("</svg>"));
        let flat = line_svg("f", "x", "y", &[Series::new("c", vec![(0.0, 1.0), (0.0, 1.0)])], false);
        assert!(!flat.contains("NaN"));
    }
}
