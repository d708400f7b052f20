//! Text output helpers shared by the experiments: fixed float formatting,
//! CSV rows and a minimal SVG writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Floats are always written with 17 significant digits so that files are
/// reproducible byte for byte.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_row(fields: &[f64]) -> String {
    fields.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Maps a data rectangle onto an SVG canvas with y pointing up.
pub struct Svg {
    width: f64,
    height: f64,
    bounds: [f64; 4],
    margin: f64,
    body: String,
}

impl Svg {
    /// `bounds` is `[x_min, x_max, y_min, y_max]` in data units.
    pub fn new(width: f64, height: f64, bounds: [f64; 4]) -> Self {
        Svg {
            width,
            height,
            bounds,
            margin: 40.0,
            body: String::new(),
        }
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        let w = self.width - 2.0 * self.margin;
        let h = self.height - 2.0 * self.margin;
        (
            self.margin + (x - x0) / (x1 - x0) * w,
            self.height - self.margin - (y - y0) / (y1 - y0) * h,
        )
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let (px, py) = self.map(x, y + h);
        let (qx, qy) = self.map(x + w, y);
        let _ = writeln!(
            self.body,
            r#"<rect x="{px:.3}" y="{py:.3}" width="{:.3}" height="{:.3}" fill="{fill}" stroke="none"/>"#,
            qx - px,
            qy - py
        );
    }

    pub fn frame(&mut self) {
        let [x0, x1, y0, y1] = self.bounds;
        let (px, py) = self.map(x0, y1);
        let (qx, qy) = self.map(x1, y0);
        let _ = writeln!(
            self.body,
            r#"<rect x="{px:.3}" y="{py:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
            qx - px,
            qy - py
        );
    }

    pub fn segments(&mut self, segs: &[[[f64; 2]; 2]], stroke: &str, width: f64) {
        if segs.is_empty() {
            return;
        }
        let mut d = String::new();
        for s in segs {
            let (ax, ay) = self.map(s[0][0], s[0][1]);
            let (bx, by) = self.map(s[1][0], s[1][1]);
            let _ = write!(d, "M{ax:.3} {ay:.3}L{bx:.3} {by:.3}");
        }
        let _ = writeln!(self.body, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#);
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str, width: f64) {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(p[0], p[1]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r_px: f64, fill: &str) {
        let (px, py) = self.map(x, y);
        let _ = writeln!(self.body, r#"<circle cx="{px:.3}" cy="{py:.3}" r="{r_px}" fill="{fill}"/>"#);
    }

    /// Text at a data position.
    pub fn text(&mut self, x: f64, y: f64, s: &str) {
        let (px, py) = self.map(x, y);
        self.text_px(px, py, s);
    }

    /// Text at a canvas position.
    pub fn text_px(&mut self, px: f64, py: f64, s: &str) {
        let escaped = s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r#"<text x="{px:.3}" y="{py:.3}" font-family="sans-serif" font-size="12">{escaped}</text>"#
        );
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_fixed_width_mantissa() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(csv_row(&[0.5, -2.0]), "5.0000000000000000e-1,-2.0000000000000000e0");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn svg_maps_corners() {
        let s = Svg::new(480.0, 280.0, [-4.0, 4.0, -2.0, 2.0]);
        assert_eq!(s.map(-4.0, -2.0), (40.0, 240.0));
        assert_eq!(s.map(4.0, 2.0), (440.0, 40.0));
        let out = s.finish();
        assert!(out.starts_with("<svg") && out.ends_with("</svg>\n"));
    }
}
