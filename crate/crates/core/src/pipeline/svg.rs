//! Minimal static SVG line charts.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// CSS color.
    pub color: String,
    /// `stroke-dasharray` value, solid when `None`.
    pub dash: Option<String>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, color: &str) -> Self {
        Series {
            label: label.into(),
            points,
            color: color.into(),
            dash: None,
        }
    }

    pub fn dashed(mut self, pattern: &str) -> Self {
        self.dash = Some(pattern.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Shaded horizontal band `(low, high)` in data units.
    pub band: Option<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const MAX_POINTS: usize = 600;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round step of roughly `span / 5`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let n = raw / mag;
    mag * if n < 1.5 {
        1.0
    } else if n < 3.5 {
        2.0
    } else if n < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y: false,
            series: Vec::new(),
            band: None,
        }
    }

    fn y_value(&self, y: f64) -> Option<f64> {
        if self.log_y {
            (y > 0.0 && y.is_finite()).then(|| y.log10())
        } else {
            y.is_finite().then_some(y)
        }
    }

    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for s in &self.series {
            for &(x, y) in &s.points {
                if let (true, Some(y)) = (x.is_finite(), self.y_value(y)) {
                    b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
                    any = true;
                }
            }
        }
        if let Some((lo, hi)) = self.band {
            for v in [lo, hi].into_iter().filter_map(|v| self.y_value(v)) {
                b = (b.0, b.1, b.2.min(v), b.3.max(v));
            }
        }
        if !any {
            return None;
        }
        if self.log_y {
            b.2 = b.2.floor();
            b.3 = b.3.ceil().max(b.2 + 1.0);
        }
        if b.1 - b.0 <= 0.0 {
            b.1 = b.0 + 1.0;
        }
        if b.3 - b.2 <= 0.0 {
            b.3 = b.2 + 1.0;
        }
        Some(b)
    }

    pub fn to_svg(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            escape(&self.title)
        );
        let Some((x0, x1, y0, y1)) = self.bounds() else {
            o.push_str("</svg>\n");
            return o;
        };
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        if let Some((lo, hi)) = self.band {
            if let (Some(a), Some(b)) = (self.y_value(lo), self.y_value(hi)) {
                let _ = writeln!(
                    o,
                    r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{:.2}" fill="#dddddd" fill-opacity="0.6"/>"##,
                    LEFT,
                    py(b.max(a)),
                    (py(a.min(b)) - py(b.max(a))).abs()
                );
            }
        }

        let step = tick_step(x1 - x0);
        let mut t = (x0 / step).ceil() * step;
        while t <= x1 + 1e-9 * step {
            let x = px(t);
            let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eeeeee"/>"##, TOP + ph);
            let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
            t += step;
        }
        let ystep = if self.log_y { 1.0 } else { tick_step(y1 - y0) };
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 + 1e-9 * ystep {
            let y = py(t);
            let text = if self.log_y { format!("1e{}", t.round() as i64) } else { label(t) };
            let _ = writeln!(o, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eeeeee"/>"##, LEFT + pw);
            let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"#, LEFT - 6.0, y + 4.0);
            t += ystep;
        }
        let _ = writeln!(o, r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
            let mut pts = String::new();
            for (k, &(x, y)) in s.points.iter().enumerate() {
                if k % stride != 0 && k + 1 != s.points.len() {
                    continue;
                }
                if let (true, Some(y)) = (x.is_finite(), self.y_value(y)) {
                    let _ = write!(pts, "{:.2},{:.2} ", px(x), py(y));
                }
            }
            let dash = s.dash.as_ref().map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
            let _ = writeln!(
                o,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.trim_end(),
                s.color
            );
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
                lx + 24.0,
                s.color
            );
            let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
        }
        o.push_str("</svg>\n");
        o
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_band_and_legend() {
        let mut p = Plot::new("Force <N>", "time (s)", "force (N)");
        p.band = Some((20.0, 25.0));
        p.series.push(Series::new("desired", vec![(0.0, 21.0), (1.0, 24.0)], "black"));
        p.series.push(Series::new("model", vec![(0.0, 19.0), (1.0, 26.0)], "red").dashed("6 3"));
        let svg = p.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("Force &lt;N&gt;"));
        assert!(svg.contains(r#"stroke-dasharray="6 3""#));
        assert!(svg.contains(r##"fill="#dddddd""##));
        assert_eq!(svg, p.to_svg());
    }

    #[test]
    fn log_axis_skips_non_positive_values() {
        let mut p = Plot::new("loss", "epoch", "SSR");
        p.log_y = true;
        p.series.push(Series::new("a", vec![(1.0, 100.0), (2.0, 0.0), (3.0, 0.1)], "blue"));
        let svg = p.to_svg();
        assert!(svg.contains(">1e-1<") && svg.contains(">1e2<"));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }

    #[test]
    fn empty_plot_is_still_valid() {
        let svg = Plot::new("empty", "x", "y").to_svg();
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(tick_step(25.0), 5.0);
        assert_eq!(tick_step(3000.0), 500.0);
        assert_eq!(tick_step(0.9), 0.2);
    }
}
