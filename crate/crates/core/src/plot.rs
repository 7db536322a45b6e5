//! Minimal static SVG scatter plots. Output is a pure function of the input
//! so plots are byte-stable across runs.

use std::fmt::Write;

use crate::maxtest::MaxTestResult;
use crate::persistence::PersistenceDiagram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Triangle,
    Diamond,
}

pub struct Svg {
    width: f64,
    height: f64,
    margin: f64,
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn pad(range: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = range;
    if !(hi > lo) {
        return (lo - 1.0, lo + 1.0);
    }
    let d = (hi - lo) * 0.05;
    (lo - d, hi + d)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Svg {
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Svg {
            width,
            height,
            margin: 48.0,
            x: pad(x),
            y: pad(y),
            body: String::new(),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.height
            - self.margin
            - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    pub fn title(&mut self, t: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            self.width / 2.0,
            esc(t)
        );
    }

    pub fn axes(&mut self, xlabel: &str, ylabel: &str) {
        let (x0, x1) = (self.margin, self.width - self.margin);
        let (y0, y1) = (self.height - self.margin, self.margin);
        let _ = writeln!(
            self.body,
            r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                self.body,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                y0 + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{:.2}" y="{py:.2}" text-anchor="end" font-size="10">{}</text>"#,
                x0 - 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            self.width / 2.0,
            self.height - 10.0,
            esc(xlabel)
        );
        let _ = writeln!(
            self.body,
            r#"<text x="14" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {:.2})">{}</text>"#,
            self.height / 2.0,
            self.height / 2.0,
            esc(ylabel)
        );
    }

    /// The line `y = x`.
    pub fn diagonal(&mut self) {
        let lo = self.x.0.max(self.y.0);
        let hi = self.x.1.min(self.y.1);
        if hi > lo {
            let _ = writeln!(
                self.body,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                self.px(lo),
                self.py(lo),
                self.px(hi),
                self.py(hi)
            );
        }
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), color: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            self.px(a.0),
            self.py(a.1),
            self.px(b.0),
            self.py(b.1)
        );
    }

    pub fn point(&mut self, x: f64, y: f64, marker: Marker, color: &str) {
        let (cx, cy) = (self.px(x), self.py(y));
        self.marker_at(cx, cy, marker, color);
    }

    fn marker_at(&mut self, cx: f64, cy: f64, marker: Marker, color: &str) {
        let r = 4.0;
        let _ = match marker {
            Marker::Circle => writeln!(
                self.body,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}" fill="none" stroke="{color}"/>"#
            ),
            Marker::Triangle => writeln!(
                self.body,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                cx,
                cy - r,
                cx - r,
                cy + r,
                cx + r,
                cy + r
            ),
            Marker::Diamond => writeln!(
                self.body,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}"/>"#,
                cx,
                cy - r,
                cx + r,
                cy,
                cx,
                cy + r,
                cx - r,
                cy
            ),
        };
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, t: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-size="10">{}</text>"#,
            self.px(x),
            self.py(y),
            esc(t)
        );
    }

    pub fn legend(&mut self, entries: &[(&str, Marker, &str)]) {
        let x = self.width - self.margin - 60.0;
        for (i, (label, marker, color)) in entries.iter().enumerate() {
            let y = self.margin + 12.0 + 16.0 * i as f64;
            self.marker_at(x, y, *marker, color);
            let _ = writeln!(
                self.body,
                r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                x + 10.0,
                y + 4.0,
                esc(label)
            );
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

const DIM_STYLE: [(Marker, &str); 3] = [
    (Marker::Circle, "#1f4e9c"),
    (Marker::Triangle, "#c0262d"),
    (Marker::Diamond, "#2e8b57"),
];

/// Birth versus death scatter, one marker style per dimension. Essential
/// classes are drawn at their reported death.
pub fn diagram_svg(pd: &PersistenceDiagram, title: &str) -> String {
    let vals = pd.points.iter().flat_map(|p| [p.birth, p.death]);
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let range = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let mut svg = Svg::new(420.0, 420.0, range, range);
    svg.title(title);
    svg.axes("birth", "death");
    svg.diagonal();
    for p in &pd.points {
        let (m, c) = DIM_STYLE[p.dim.min(2)];
        svg.point(p.birth, p.death, m, c);
    }
    let dims: Vec<usize> = (0..3).filter(|&d| pd.in_dim(d).next().is_some()).collect();
    let labels: Vec<String> = dims.iter().map(|d| format!("H{d}")).collect();
    let entries: Vec<(&str, Marker, &str)> = dims
        .iter()
        .zip(&labels)
        .map(|(&d, l)| (l.as_str(), DIM_STYLE[d].0, DIM_STYLE[d].1))
        .collect();
    svg.legend(&entries);
    svg.finish()
}

/// Histogram of the null maxima with the observed statistic marked.
pub fn null_svg(res: &MaxTestResult) -> String {
    let nulls = &res.null_samples;
    let hi = nulls.iter().copied().fold(res.rho_obs, f64::max).max(1e-9);
    let bins = 20usize;
    let mut counts = vec![0usize; bins];
    for &v in nulls {
        counts[((v / hi * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut svg = Svg::new(480.0, 320.0, (0.0, hi), (0.0, top));
    svg.title(&format!("Null maxima, H{} (p = {})", res.dim, res.p_value));
    svg.axes("maximum persistence", "count");
    let w = hi / bins as f64;
    for (k, &n) in counts.iter().enumerate() {
        if n > 0 {
            let x = (k as f64 + 0.5) * w;
            svg.line((x, 0.0), (x, n as f64), "#7f7f7f");
        }
    }
    svg.line((res.rho_obs, 0.0), (res.rho_obs, top), "#c0262d");
    svg.text(res.rho_obs, top, "end", "observed");
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_output() {
        let build = || {
            let mut s = Svg::new(200.0, 200.0, (0.0, 1.0), (0.0, 1.0));
            s.axes("a", "b<c");
            s.point(0.5, 0.5, Marker::Diamond, "red");
            s.finish()
        };
        let a = build();
        assert_eq!(a, build());
        assert!(a.contains("b&lt;c"));
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let s = Svg::new(100.0, 100.0, (3.0, 3.0), (0.0, 0.0));
        assert!(s.px(3.0).is_finite() && s.py(0.0).is_finite());
    }
}
