//! Static SVG scatter plots. Regions of dimension three or more are drawn as
//! the `(x1, x2)` and `(x1, x3)` projections side by side.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::polygon::PolygonSet;
use crate::region::BoundingBox;

const PANEL: f64 = 460.0;
const MARGIN: f64 = 40.0;
/// Larger clouds are thinned by a fixed stride before drawing.
pub const MAX_DRAWN_POINTS: usize = 20_000;

/// A design point overlaid on the cloud.
#[derive(Debug, Clone)]
pub struct Marker {
    pub point: Vec<f64>,
    pub feasible: bool,
}

pub struct Plot<'a> {
    pub bbox: &'a BoundingBox,
    pub cloud: &'a [f64],
    pub markers: &'a [Marker],
    pub outline: Option<&'a PolygonSet>,
    pub title: &'a str,
}

fn projections(dim: usize) -> Vec<(usize, usize)> {
    match dim {
        0 | 1 => vec![(0, 0)],
        2 => vec![(0, 1)],
        _ => vec![(0, 1), (0, 2)],
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Plot<'_> {
    pub fn render(&self) -> String {
        let dim = self.bbox.dim();
        let panels = projections(dim);
        let width = panels.len() as f64 * (PANEL + MARGIN) + MARGIN;
        let height = PANEL + 2.0 * MARGIN;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN:.0}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
            escape(self.title)
        );
        let n = self.cloud.len().checked_div(dim).unwrap_or(0);
        let stride = n.div_ceil(MAX_DRAWN_POINTS).max(1);
        for (p, &(a, b)) in panels.iter().enumerate() {
            let x0 = MARGIN + p as f64 * (PANEL + MARGIN);
            let (lo, hi) = (self.bbox.lower(), self.bbox.upper());
            let flat_y = a == b;
            let sx = |v: f64| x0 + (v - lo[a]) / (hi[a] - lo[a]) * PANEL;
            let sy = |v: f64| {
                if flat_y {
                    MARGIN + PANEL / 2.0
                } else {
                    MARGIN + PANEL - (v - lo[b]) / (hi[b] - lo[b]) * PANEL
                }
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x0:.2}" y="{MARGIN:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#444"/>"##
            );
            let ylabel = if flat_y {
                String::new()
            } else {
                format!("x{}", b + 1)
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">x{} / {}</text>"#,
                x0 + PANEL / 2.0,
                MARGIN + PANEL + 28.0,
                a + 1,
                ylabel
            );
            if let (Some(poly), false) = (self.outline, flat_y) {
                for ring in poly.rings() {
                    let pts: Vec<String> = ring
                        .vertices()
                        .iter()
                        .map(|v| format!("{:.2},{:.2}", sx(v[0]), sy(v[1])))
                        .collect();
                    let _ = writeln!(
                        s,
                        r##"<polygon points="{}" fill="none" stroke="#2a6" stroke-width="0.8"/>"##,
                        pts.join(" ")
                    );
                }
            }
            let _ = writeln!(s, r##"<g fill="#555" fill-opacity="0.45">"##);
            for i in (0..n).step_by(stride) {
                let x = &self.cloud[i * dim..(i + 1) * dim];
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="1.1"/>"#,
                    sx(x[a]),
                    sy(x[b])
                );
            }
            let _ = writeln!(s, "</g>");
            for m in self.markers {
                let (cx, cy) = (sx(m.point[a]), sy(m.point[b]));
                if m.feasible {
                    let _ = writeln!(
                        s,
                        r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="#d22" stroke="black" stroke-width="0.6"/>"##
                    );
                } else {
                    let _ = writeln!(
                        s,
                        r##"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="#14d" stroke-width="2"/>"##,
                        cx - 4.0,
                        cy - 4.0,
                        cx + 4.0,
                        cy + 4.0,
                        cx - 4.0,
                        cy + 4.0,
                        cx + 4.0,
                        cy - 4.0
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_panels_and_markers() {
        let bbox = BoundingBox::cube(3, -1.0, 1.0).unwrap();
        let cloud = vec![0.0, 0.0, 0.0, 0.5, -0.5, 1.0];
        let markers = vec![
            Marker {
                point: vec![0.0, 0.0, 0.0],
                feasible: true,
            },
            Marker {
                point: vec![0.9, 0.9, 0.9],
                feasible: false,
            },
        ];
        let svg = Plot {
            bbox: &bbox,
            cloud: &cloud,
            markers: &markers,
            outline: None,
            title: "a < b",
        }
        .render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        // Two projections, two cloud points each.
        assert_eq!(svg.matches(r#"r="1.1""#).count(), 4);
        assert_eq!(svg.matches("<path").count(), 2);
        // Centre of the first panel.
        assert!(svg.contains(r#"cx="270.00" cy="270.00" r="4""#));
    }

    #[test]
    fn thins_large_clouds() {
        let bbox = BoundingBox::cube(2, 0.0, 1.0).unwrap();
        let cloud = vec![0.5; 2 * (MAX_DRAWN_POINTS + 10)];
        let svg = Plot {
            bbox: &bbox,
            cloud: &cloud,
            markers: &[],
            outline: None,
            title: "",
        }
        .render();
        assert!(svg.matches(r#"r="1.1""#).count() <= MAX_DRAWN_POINTS);
    }
}
