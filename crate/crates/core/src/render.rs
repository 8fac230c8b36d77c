//! Map images of an instance and, optionally, a deployment.
//!
//! Weak cells are shaded by traffic (light to dark red), other populated
//! cells are light gray, existing stations are black squares, and new macro
//! and micro stations are blue and green dots with their coverage disks
//! outlined. Output is byte-identical for identical inputs.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::model::{Deployment, ProblemInstance, StationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    /// Binary portable pixmap (P6).
    #[default]
    Ppm,
    Svg,
}

impl FromStr for ImageFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ppm" => Ok(ImageFormat::Ppm),
            "svg" => Ok(ImageFormat::Svg),
            other => Err(format!("unknown image format `{other}` (expected ppm or svg)")),
        }
    }
}

type Rgb = [u8; 3];

const BACKGROUND: Rgb = [255, 255, 255];
const TRAFFIC: Rgb = [225, 225, 225];
const WEAK_LOW: Rgb = [255, 214, 170];
const WEAK_HIGH: Rgb = [170, 20, 0];
const EXISTING: Rgb = [0, 0, 0];
const MACRO: Rgb = [20, 80, 220];
const MICRO: Rgb = [0, 150, 60];

fn station_color(kind: StationKind) -> Rgb {
    match kind {
        StationKind::Macro => MACRO,
        StationKind::Micro => MICRO,
    }
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Color of every populated cell, lerped by traffic relative to the busiest weak cell.
fn cell_colors(instance: &ProblemInstance) -> impl Iterator<Item = (i64, i64, Rgb)> + '_ {
    let peak = instance.weak_cells().map(|c| c.traffic).fold(0.0f64, f64::max);
    instance.cells().iter().filter(|c| c.weak || c.traffic > 0.0).map(move |c| {
        let color = if c.weak {
            let t = if peak > 0.0 { (c.traffic / peak).clamp(0.0, 1.0) } else { 0.0 };
            let mix = |i: usize| (f64::from(WEAK_LOW[i]) + t * (f64::from(WEAK_HIGH[i]) - f64::from(WEAK_LOW[i]))).round() as u8;
            [mix(0), mix(1), mix(2)]
        } else {
            TRAFFIC
        };
        (c.x, c.y, color)
    })
}

struct Canvas {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Canvas {
    fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }
}

/// Renders a P6 pixmap with `scale` pixels per cell.
pub fn render_ppm(instance: &ProblemInstance, deployment: Option<&Deployment>, scale: u32) -> Vec<u8> {
    let s = i64::from(scale.max(1));
    let mut canvas = Canvas {
        width: (instance.width() * s) as usize,
        height: (instance.height() * s) as usize,
        pixels: vec![BACKGROUND; (instance.width() * s * instance.height() * s) as usize],
    };
    for (x, y, color) in cell_colors(instance) {
        for py in y * s..(y + 1) * s {
            for px in x * s..(x + 1) * s {
                canvas.set(px, py, color);
            }
        }
    }
    let center = |v: i64| v * s + s / 2;
    let mut stations = deployment.map(|d| d.stations.clone()).unwrap_or_default();
    stations.sort_by_key(|st| (st.y, st.x));
    for st in &stations {
        // Disk outline: pixels whose distance to the center is within half a pixel of the radius.
        let r = instance.params().radius(st.kind) * s as f64;
        let (cx, cy) = (center(st.x), center(st.y));
        let reach = r.ceil() as i64 + 1;
        for py in cy - reach..=cy + reach {
            for px in cx - reach..=cx + reach {
                let d = (((px - cx).pow(2) + (py - cy).pow(2)) as f64).sqrt();
                if (d - r).abs() <= 0.5 {
                    canvas.set(px, py, station_color(st.kind));
                }
            }
        }
    }
    let glyph = (s / 2).max(1) + 1;
    for e in instance.existing_stations() {
        let (cx, cy) = (center(e.x), center(e.y));
        for py in cy - glyph..=cy + glyph {
            for px in cx - glyph..=cx + glyph {
                canvas.set(px, py, EXISTING);
            }
        }
    }
    for st in &stations {
        let (cx, cy) = (center(st.x), center(st.y));
        for py in cy - glyph..=cy + glyph {
            for px in cx - glyph..=cx + glyph {
                if (px - cx).pow(2) + (py - cy).pow(2) <= glyph * glyph {
                    canvas.set(px, py, station_color(st.kind));
                }
            }
        }
    }
    let mut out = format!("P6\n{} {}\n255\n", canvas.width, canvas.height).into_bytes();
    out.reserve(canvas.pixels.len() * 3);
    for p in &canvas.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Renders an SVG document in cell units, `scale` pixels per cell.
///
/// Elements carry classes `weak`, `traffic`, `existing`, `coverage-macro`,
/// `coverage-micro`, `new-macro` and `new-micro`.
pub fn render_svg(instance: &ProblemInstance, deployment: Option<&Deployment>, scale: u32) -> String {
    let (w, h) = (instance.width(), instance.height());
    let s = i64::from(scale.max(1));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {w} {h}">"#,
        w * s,
        h * s
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let weak: std::collections::HashSet<(i64, i64)> = instance.weak_cells().map(|c| (c.x, c.y)).collect();
    for (x, y, color) in cell_colors(instance) {
        let class = if weak.contains(&(x, y)) { "weak" } else { "traffic" };
        let _ = writeln!(out, r#"<rect class="{class}" x="{x}" y="{y}" width="1" height="1" fill="{}"/>"#, hex(color));
    }
    let mut stations = deployment.map(|d| d.stations.clone()).unwrap_or_default();
    stations.sort_by_key(|st| (st.y, st.x));
    for st in &stations {
        let _ = writeln!(
            out,
            r#"<circle class="coverage-{}" cx="{}.5" cy="{}.5" r="{}" fill="none" stroke="{}" stroke-width="0.3"/>"#,
            st.kind,
            st.x,
            st.y,
            instance.params().radius(st.kind),
            hex(station_color(st.kind))
        );
    }
    for e in instance.existing_stations() {
        let _ = writeln!(
            out,
            r#"<rect class="existing" x="{}" y="{}" width="2" height="2" fill="{}"/>"#,
            e.x as f64 - 0.5,
            e.y as f64 - 0.5,
            hex(EXISTING)
        );
    }
    for st in &stations {
        let _ = writeln!(
            out,
            r#"<circle class="new-{}" cx="{}.5" cy="{}.5" r="1.2" fill="{}"/>"#,
            st.kind,
            st.x,
            st.y,
            hex(station_color(st.kind))
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn render(
    instance: &ProblemInstance,
    deployment: Option<&Deployment>,
    format: ImageFormat,
    scale: u32,
) -> Vec<u8> {
    match format {
        ImageFormat::Ppm => render_ppm(instance, deployment, scale),
        ImageFormat::Svg => render_svg(instance, deployment, scale).into_bytes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridCell, PlacedStation, RadioParams, Site};

    fn instance() -> ProblemInstance {
        let cells = vec![GridCell::new(5, 5, 4.0, true), GridCell::new(6, 5, 2.0, true), GridCell::new(1, 1, 1.0, false)];
        ProblemInstance::new(20, 10, cells, vec![Site::new(15, 5)], RadioParams::default()).unwrap()
    }

    #[test]
    fn ppm_header_size_and_pixels() {
        let img = render_ppm(&instance(), None, 2);
        let header = b"P6\n40 20\n255\n";
        assert!(img.starts_with(header));
        assert_eq!(img.len(), header.len() + 40 * 20 * 3);
        let px = |x: usize, y: usize| {
            let i = header.len() + (y * 40 + x) * 3;
            [img[i], img[i + 1], img[i + 2]]
        };
        assert_eq!(px(10, 10), WEAK_HIGH);
        assert_eq!(px(2, 2), TRAFFIC);
        assert_eq!(px(0, 0), BACKGROUND);
        assert_eq!(px(31, 11), EXISTING);
    }

    #[test]
    fn svg_glyph_counts() {
        let d = Deployment::new(vec![PlacedStation::micro_at(5, 5), PlacedStation::macro_at(2, 2)]);
        let svg = render_svg(&instance(), Some(&d), 4);
        assert_eq!(svg.matches(r#"class="new-"#).count(), 2);
        assert_eq!(svg.matches(r#"class="new-macro""#).count(), 1);
        assert_eq!(svg.matches(r#"class="coverage-"#).count(), 2);
        assert_eq!(svg.matches(r#"class="existing""#).count(), 1);
        assert_eq!(svg.matches(r#"class="weak""#).count(), 2);
        let bare = render_svg(&instance(), None, 4);
        assert_eq!(bare.matches(r#"class="new-"#).count(), 0);
        assert_eq!(render_svg(&instance(), Some(&d), 4), svg);
    }
}
