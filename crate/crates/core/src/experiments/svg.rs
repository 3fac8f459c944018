//! Minimal SVG output with fixed number formatting, so equal inputs give
//! equal bytes.

use std::fmt::Write as _;

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

fn n(v: f64) -> String {
    let s = format!("{v:.2}");
    // avoid "-0.00"
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height, body: String::new() }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(self.body, r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{stroke}"/>"#, n(x), n(y), n(w), n(h));
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, n(cx), n(cy), n(r));
    }

    pub fn cross(&mut self, cx: f64, cy: f64, half: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="{stroke}" stroke-width="1"/>"#,
            n(cx - half),
            n(cy - half),
            n(cx + half),
            n(cy + half),
            n(cx - half),
            n(cy + half),
            n(cx + half),
            n(cy - half)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(self.body, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"/>"#, n(x1), n(y1), n(x2), n(y2));
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            n(x),
            n(y),
            n(size),
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{2}</svg>\n",
            n(self.width),
            n(self.height),
            self.body
        )
    }
}

/// Sequential blue-to-yellow colour for `t` in [0, 1].
pub fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let f = x - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Plot frame mapping data ranges onto a square panel with axes.
pub struct Panel {
    pub x0: f64,
    pub y0: f64,
    pub size: f64,
    pub xr: (f64, f64),
    pub yr: (f64, f64),
}

impl Panel {
    pub fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.size
    }

    /// SVG y grows downwards.
    pub fn py(&self, y: f64) -> f64 {
        self.y0 + self.size - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.size
    }

    pub fn axes(&self, svg: &mut Svg, xlabel: &str, ylabel: &str, ticks: bool) {
        svg.rect(self.x0, self.y0, self.size, self.size, "none", "black");
        if ticks {
            for k in 0..=4 {
                let f = k as f64 / 4.0;
                let xv = self.xr.0 + f * (self.xr.1 - self.xr.0);
                let yv = self.yr.0 + f * (self.yr.1 - self.yr.0);
                let (x, y) = (self.px(xv), self.py(yv));
                svg.line(x, self.y0 + self.size, x, self.y0 + self.size + 4.0, "black");
                svg.text(x, self.y0 + self.size + 15.0, 10.0, "middle", &format!("{xv:.2}"));
                svg.line(self.x0 - 4.0, y, self.x0, y, "black");
                svg.text(self.x0 - 6.0, y + 3.0, 10.0, "end", &format!("{yv:.2}"));
            }
            svg.text(self.x0 + self.size / 2.0, self.y0 + self.size + 30.0, 12.0, "middle", xlabel);
            svg.text(self.x0 - 40.0, self.y0 + self.size / 2.0, 12.0, "middle", ylabel);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_span_the_ramp() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn output_is_stable() {
        let mut s = Svg::new(10.0, 10.0);
        s.circle(1.0, -0.0, 0.5, "red");
        s.text(0.0, 0.0, 5.0, "start", "a<b");
        let out = s.finish();
        assert!(out.contains(r#"<circle cx="1.00" cy="0.00" r="0.50" fill="red"/>"#));
        assert!(out.contains("a&lt;b"));
        assert!(out.starts_with("<svg"));
    }
}
