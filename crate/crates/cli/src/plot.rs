//! Minimal native SVG line and step plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Horizontal then vertical segments between consecutive points.
    Steps,
    /// Straight segments with point markers.
    Lines,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log: bool,
    pub style: Style,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + hi.abs()) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot<'_> {
    pub fn render(&self, series: &[Series]) -> String {
        let tx = |v: f64| if self.log { v.log10() } else { v };
        let usable = |p: &&(f64, f64)| !self.log || (p.0 > 0.0 && p.1 > 0.0);
        let all = || series.iter().flat_map(|s| s.points.iter().filter(usable));
        let (x0, x1) = range(all().map(|p| tx(p.0)));
        let (y0, y1) = range(all().map(|p| tx(p.1)));
        let sx = |v: f64| MARGIN + (tx(v) - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |v: f64| HEIGHT - MARGIN - (tx(v) - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (l + f * (r - l), b - f * (b - t));
            let fmt = |v: f64| {
                if self.log {
                    format!("1e{v:.1}")
                } else {
                    format!("{v:.3}")
                }
            };
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                b + 16.0,
                fmt(xv)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{py:.2}" text-anchor="end">{}</text>"#,
                l - 6.0,
                fmt(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 18.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(self.y_label)
        );
        for (i, s) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = s.points.iter().filter(usable).map(|&(x, y)| (sx(x), sy(y))).collect();
            let mut path = String::new();
            for (j, &(x, y)) in pts.iter().enumerate() {
                if j == 0 {
                    let _ = write!(path, "{x:.2},{y:.2}");
                } else {
                    if self.style == Style::Steps {
                        let _ = write!(path, " {x:.2},{:.2}", pts[j - 1].1);
                    }
                    let _ = write!(path, " {x:.2},{y:.2}");
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            );
            if self.style == Style::Lines {
                for &(x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                r - 120.0,
                t + 14.0 * (i as f64 + 1.0),
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_deterministic_svg() {
        let plot = Plot {
            title: "a < b",
            x_label: "k",
            y_label: "lambda",
            log: false,
            style: Style::Steps,
        };
        let s = [Series {
            label: "spectrum".into(),
            points: vec![(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)],
        }];
        let a = plot.render(&s);
        assert_eq!(a, plot.render(&s));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a &lt; b"));
    }

    #[test]
    fn log_axes_drop_nonpositive_points() {
        let plot = Plot {
            title: "t",
            x_label: "n",
            y_label: "e",
            log: true,
            style: Style::Lines,
        };
        let s = [Series {
            label: "k=2".into(),
            points: vec![(64.0, 1e-3), (128.0, 0.0), (256.0, 6e-5)],
        }];
        assert_eq!(plot.render(&s).matches("<circle").count(), 2);
    }
}
