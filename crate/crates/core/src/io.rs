//! File formats shared by the solvers and the command-line tool.
//!
//! Grid data is a flat little-endian f64 array in row-major order (index
//! `j * nx + i`) next to a JSON sidecar describing the grid. Nodes outside a
//! field's domain are written as NaN.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DomainMask, Grid, LevelContour, Polyline, ScalarField};
use crate::freeboundary::IterationRecord;
use crate::vec2::Vec2;

/// `x` rounded to 9 significant digits, printed in the shortest form that
/// reads back to the rounded value. Non-finite values print as `NaN`,
/// `inf` or `-inf`.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting round-trips");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// `x` rounded to 9 significant digits as a number (non-finite kept).
pub fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().expect("float formatting round-trips")
    } else {
        x
    }
}

/// The JSON sidecar of a binary grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub data: String,
    pub kind: String,
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub dtype: String,
    pub endianness: String,
    pub order: String,
}

impl GridSidecar {
    fn new(data: &str, kind: &str, g: &Grid) -> Self {
        GridSidecar {
            data: data.to_string(),
            kind: kind.to_string(),
            origin: [g.origin.x, g.origin.y],
            h: g.h,
            nx: g.nx,
            ny: g.ny,
            dtype: "f64".into(),
            endianness: "little".into(),
            order: "row-major".into(),
        }
    }

    fn grid(&self) -> Result<Grid> {
        if self.dtype != "f64" || self.endianness != "little" || self.order != "row-major" {
            return Err(Error::InvalidGrid(format!(
                "unsupported layout {} {} {}",
                self.dtype, self.endianness, self.order
            )));
        }
        Grid::new(Vec2::new(self.origin[0], self.origin[1]), self.h, self.nx, self.ny)
    }
}

fn write_grid_data(dir: &Path, stem: &str, kind: &str, grid: &Grid, values: impl Iterator<Item = f64>) -> Result<PathBuf> {
    let data = format!("{stem}.f64");
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(dir.join(&data), bytes)?;
    let sidecar = dir.join(format!("{stem}.json"));
    write_json(&sidecar, &GridSidecar::new(&data, kind, grid))?;
    Ok(sidecar)
}

fn read_grid_data(sidecar: &Path, kind: &str) -> Result<(Grid, Vec<f64>)> {
    let meta: GridSidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    if meta.kind != kind {
        return Err(Error::InvalidParameter(format!("{} holds a {}, not a {kind}", sidecar.display(), meta.kind)));
    }
    let grid = meta.grid()?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&meta.data))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::InvalidGrid(format!(
            "{} has {} bytes, expected {}",
            meta.data,
            bytes.len(),
            8 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((grid, values))
}

/// Writes `<stem>.f64` and `<stem>.json` into `dir`; returns the sidecar path.
pub fn write_field(dir: &Path, stem: &str, field: &ScalarField) -> Result<PathBuf> {
    let values = field
        .values()
        .iter()
        .zip(field.valid())
        .map(|(&v, &ok)| if ok { v } else { f64::NAN });
    write_grid_data(dir, stem, "field", field.grid(), values)
}

/// Reads a field written by [`write_field`]; NaN nodes become invalid.
pub fn read_field(sidecar: &Path) -> Result<ScalarField> {
    let (grid, raw) = read_grid_data(sidecar, "field")?;
    let valid: Vec<bool> = raw.iter().map(|v| !v.is_nan()).collect();
    let values = raw.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect();
    ScalarField::with_valid(grid, values, valid)
}

/// Writes the level-set function φ of `mask`.
pub fn write_mask(dir: &Path, stem: &str, mask: &DomainMask) -> Result<PathBuf> {
    write_grid_data(dir, stem, "mask", mask.grid(), mask.phi().iter().copied())
}

pub fn read_mask(sidecar: &Path) -> Result<DomainMask> {
    let (grid, phi) = read_grid_data(sidecar, "mask")?;
    DomainMask::from_phi(grid, phi)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// `level,component_id,vertex_id,x,y`, one row per polyline vertex.
pub fn contours_csv(contours: &[LevelContour]) -> String {
    let mut out = String::from("level,component_id,vertex_id,x,y\n");
    for c in contours {
        for (k, line) in c.polylines.iter().enumerate() {
            for (v, p) in line.points.iter().enumerate() {
                let _ = writeln!(out, "{},{k},{v},{},{}", fmt9(c.level), fmt9(p.x), fmt9(p.y));
            }
        }
    }
    out
}

/// `iter,max_res,mean_res`.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iter,max_res,mean_res\n");
    for r in history {
        let _ = writeln!(out, "{},{},{}", r.iter, fmt9(r.max_res), fmt9(r.mean_res));
    }
    out
}

/// Named polyline groups for [`overlay_svg`].
pub struct SvgLayer<'a> {
    pub class: &'a str,
    pub level: f64,
    pub polylines: &'a [Polyline],
}

/// Overlays polyline layers in world coordinates (y up) on a white canvas
/// `size` pixels wide. Each path carries `data-level`.
pub fn overlay_svg(layers: &[SvgLayer], size: f64) -> String {
    let pts = layers.iter().flat_map(|l| l.polylines.iter()).flat_map(|p| p.points.iter());
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if !lo.is_finite() {
        lo = Vec2::new(-1.0, -1.0);
        hi = Vec2::new(1.0, 1.0);
    }
    let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    lo = lo - Vec2::new(pad, pad);
    hi = hi + Vec2::new(pad, pad);
    let scale = size / (hi.x - lo.x);
    let height = ((hi.y - lo.y) * scale).ceil();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        size, height, size, height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    for (k, layer) in layers.iter().enumerate() {
        let colour = palette[k % palette.len()];
        let dash = if layer.class.starts_with("radial") { r#" stroke-dasharray="4 3""# } else { "" };
        for line in layer.polylines {
            let mut d = String::new();
            for (v, p) in line.points.iter().enumerate() {
                let x = (p.x - lo.x) * scale;
                let y = (hi.y - p.y) * scale;
                let _ = write!(d, "{}{:.2},{:.2} ", if v == 0 { "M" } else { "L" }, x, y);
            }
            if line.closed {
                d.push('Z');
            }
            let _ = writeln!(
                out,
                r#"<path class="{}" data-level="{}" d="{}" fill="none" stroke="{}" stroke-width="1.2"{}/>"#,
                layer.class,
                fmt9(layer.level),
                d.trim_end(),
                colour,
                dash
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.75), "0.75");
        assert_eq!(fmt9(0.5687307530870823), "0.568730753");
        assert_eq!(fmt9(-1.0 / 3.0), "-0.333333333");
        assert_eq!(fmt9(123456789012.0), "123456789000");
        assert_eq!(fmt9(-0.0), "0");
        assert_eq!(fmt9(f64::NAN), "NaN");
        assert_eq!(round9(2.0f64.sqrt()), 1.41421356);
    }

    fn grid() -> Grid {
        Grid::centered(Vec2::ZERO, Vec2::new(1.2, 1.2), 1.0 / 16.0).unwrap()
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let mask = DomainMask::disk(g, Vec2::ZERO, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |p| 1.0 - p.norm_sq()).masked(&mask);
        let side = write_field(dir.path(), "field", &f).unwrap();
        assert_eq!(read_field(&side).unwrap(), f);
        let bytes = fs::read(dir.path().join("field.f64")).unwrap();
        assert_eq!(bytes.len(), 8 * g.len());
        let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
        assert!(first.is_nan());
        let side = write_mask(dir.path(), "mask", &mask).unwrap();
        assert_eq!(read_mask(&side).unwrap().phi(), mask.phi());
        assert!(read_field(&side).is_err());
    }

    #[test]
    fn csv_layouts() {
        let c = LevelContour {
            level: 0.2,
            polylines: vec![Polyline {
                points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.5)],
                closed: false,
            }],
        };
        assert_eq!(contours_csv(&[c]), "level,component_id,vertex_id,x,y\n0.2,0,0,0,0\n0.2,0,1,1,0.5\n");
        let h = [IterationRecord {
            iter: 0,
            max_res: 0.25,
            mean_res: 0.125,
        }];
        assert_eq!(history_csv(&h), "iter,max_res,mean_res\n0,0.25,0.125\n");
    }

    #[test]
    fn svg_has_levels() {
        let line = [Polyline {
            points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            closed: true,
        }];
        let svg = overlay_svg(
            &[SvgLayer {
                class: "contour",
                level: 0.5,
                polylines: &line,
            }],
            400.0,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"data-level="0.5""#));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
