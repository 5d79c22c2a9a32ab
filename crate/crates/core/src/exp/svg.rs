//! Hand-rolled static SVG line charts (fixed 800x600 viewbox).
//!
//! Only what the lab's figures need: one or more series from a result
//! table, optional log axes, and an optional dashed reference envelope.
//! Output is fully deterministic.

use std::fmt::Write as _;

use crate::exp::table::ResultTable;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Declarative chart description.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_column: String,
    pub y_columns: Vec<String>,
    pub log_x: bool,
    pub log_y: bool,
    /// Optional dashed reference curve (label, points).
    pub envelope: Option<(String, Vec<(f64, f64)>)>,
}

impl PlotSpec {
    pub fn line(title: &str, x: &str, ys: &[&str]) -> Self {
        PlotSpec {
            title: title.to_string(),
            x_column: x.to_string(),
            y_columns: ys.iter().map(|s| s.to_string()).collect(),
            log_x: false,
            log_y: false,
            envelope: None,
        }
    }

    pub fn semilog_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn with_envelope(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.envelope = Some((label.to_string(), points));
        self
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    if log {
        if v > 0.0 {
            Some(v.log10())
        } else {
            None
        }
    } else {
        Some(v)
    }
}

/// Renders the chart, or `None` when the table has no plottable rows.
pub fn render_line_chart(table: &ResultTable, spec: &PlotSpec) -> Option<String> {
    if table.rows.is_empty() {
        return None;
    }
    let xs_raw = table.column(&spec.x_column)?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for name in &spec.y_columns {
        let ys = table.column(name)?;
        let pts: Vec<(f64, f64)> = xs_raw
            .iter()
            .zip(&ys)
            .filter_map(|(&x, &y)| Some((transform(x, spec.log_x)?, transform(y, spec.log_y)?)))
            .collect();
        series.push((name.clone(), pts));
    }
    if let Some((label, pts)) = &spec.envelope {
        let mapped: Vec<(f64, f64)> = pts
            .iter()
            .filter_map(|&(x, y)| Some((transform(x, spec.log_x)?, transform(y, spec.log_y)?)))
            .collect();
        series.push((label.clone(), mapped));
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    if all.is_empty() {
        return None;
    }
    let (mut x_lo, mut x_hi) = bounds(all.iter().map(|p| p.0));
    let (mut y_lo, mut y_hi) = bounds(all.iter().map(|p| p.1));
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }

    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="13">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(&spec.title)
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let fmt_axis = |v: f64, log: bool| -> String {
        if log {
            format!("1e{v:.2}")
        } else {
            format!("{v:.3}")
        }
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN,
        HEIGHT - MARGIN + 25.0,
        fmt_axis(x_lo, spec.log_x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 25.0,
        fmt_axis(x_hi, spec.log_x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN - 8.0,
        HEIGHT - MARGIN,
        fmt_axis(y_lo, spec.log_y)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN - 8.0,
        MARGIN + 5.0,
        fmt_axis(y_hi, spec.log_y)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0,
        xml_escape(&spec.x_column)
    );

    for (idx, (name, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let is_envelope = spec.envelope.as_ref().map(|(l, _)| l == name).unwrap_or(false);
        let color = COLORS[idx % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let dash = if is_envelope { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 5.0,
            MARGIN + 18.0 * idx as f64,
            xml_escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_envelope() {
        let mut t = ResultTable::new(&["t", "value"]);
        for k in 0..10 {
            let x = k as f64 * 0.1;
            t.push_row(vec![x, (-x).exp()]);
        }
        let spec = PlotSpec::line("decay", "t", &["value"])
            .semilog_y()
            .with_envelope("bound", (0..10).map(|k| (k as f64 * 0.1, 1.1)).collect());
        let svg = render_line_chart(&t, &spec).unwrap();
        assert!(svg.contains("<polyline"));
        assert!(svg.matches("<polyline").count() == 2);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("decay"));
    }

    #[test]
    fn empty_table_renders_nothing() {
        let t = ResultTable::new(&["t", "v"]);
        let spec = PlotSpec::line("x", "t", &["v"]);
        assert!(render_line_chart(&t, &spec).is_none());
    }

    #[test]
    fn output_is_deterministic() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.push_row(vec![0.0, 1.0]);
        t.push_row(vec![1.0, 2.0]);
        let spec = PlotSpec::line("p", "a", &["b"]);
        let one = render_line_chart(&t, &spec).unwrap();
        let two = render_line_chart(&t, &spec).unwrap();
        assert_eq!(one, two);
    }
}
