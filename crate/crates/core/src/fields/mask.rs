use super::contour::{marching_squares, Polyline};
use super::grid::Grid;
use super::redistance::redistance;
use super::scalar::{Interpolation, ScalarField};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Implicit domain Ω given by a signed distance φ (negative inside).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    phi: ScalarField,
}

impl DomainMask {
    pub fn from_phi(grid: Grid, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("expected {} values, got {}", grid.len(), phi.len())));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite level-set value".into()));
        }
        Ok(DomainMask {
            phi: ScalarField::new(grid, phi)?,
        })
    }

    pub fn from_signed_distance(grid: Grid, sd: impl Fn(Vec2) -> f64) -> Result<Self> {
        DomainMask::from_phi(grid, grid.map_nodes(sd))
    }

    pub fn disk(grid: Grid, center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("disk radius must be positive, got {radius}")));
        }
        DomainMask::from_signed_distance(grid, |p| p.distance(center) - radius)
    }

    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b` (along y).
    pub fn ellipse(grid: Grid, center: Vec2, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter("ellipse semi-axes must be positive".into()));
        }
        DomainMask::from_signed_distance(grid, |p| ellipse_signed_distance(p - center, a, b))
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn phi(&self) -> &[f64] {
        self.phi.values()
    }

    pub(crate) fn phi_mut(&mut self) -> &mut [f64] {
        self.phi.values_mut()
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.phi
    }

    /// Cubic interpolation of φ.
    pub fn phi_at(&self, x: Vec2) -> Result<f64> {
        self.phi.sample(x, Interpolation::CatmullRom).map(|s| s.value)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.phi_at(x).map_or(false, |p| p < 0.0)
    }

    /// Outward unit normal ∇φ/|∇φ| from central differences of φ.
    pub fn normal_at(&self, x: Vec2) -> Result<Vec2> {
        let g = self.phi.gradient(x)?.value;
        g.normalized()
            .ok_or_else(|| Error::InvalidParameter(format!("vanishing level-set gradient at ({}, {})", x.x, x.y)))
    }

    /// Fails unless every node within `cells` of the grid border is outside Ω.
    pub fn check_margin(&self, cells: usize) -> Result<()> {
        let g = *self.grid();
        let phi = self.phi();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let border = i < cells || j < cells || i + cells >= g.nx || j + cells >= g.ny;
                if border && phi[g.index(i, j)] <= 0.0 {
                    return Err(Error::Precondition(format!(
                        "domain comes within {cells} cells of the grid border"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Restores |∇φ| ≈ 1 while keeping the zero crossings on grid edges.
    pub fn redistance(&mut self) {
        let g = *self.grid();
        redistance(&g, self.phi.values_mut());
    }

    /// ∂Ω as polylines (counterclockwise around Ω).
    pub fn boundary(&self) -> Vec<Polyline> {
        let neg: Vec<f64> = self.phi().iter().map(|p| -p).collect();
        marching_squares(self.grid(), &neg, 0.0)
    }

    /// Area of Ω estimated from the boundary polylines.
    pub fn area(&self) -> f64 {
        self.boundary().iter().filter(|p| p.closed).map(|p| p.signed_area()).sum()
    }
}

/// Signed distance to the ellipse x²/a² + y²/b² = 1 (negative inside).
pub fn ellipse_signed_distance(p: Vec2, a: f64, b: f64) -> f64 {
    let inside = (p.x / a).powi(2) + (p.y / b).powi(2) < 1.0;
    let d = if a >= b {
        ellipse_distance_quadrant(a, b, p.x.abs(), p.y.abs())
    } else {
        ellipse_distance_quadrant(b, a, p.y.abs(), p.x.abs())
    };
    if inside {
        -d
    } else {
        d
    }
}

/// Distance from (y0, y1) in the first quadrant to the ellipse with
/// semi-axes e0 ≥ e1 (Eberly's bisection on the Lagrange parameter).
fn ellipse_distance_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let sbar = ellipse_root(r0, z0, z1, g);
                let x0 = r0 * y0 / (sbar + r0);
                let x1 = y1 / (sbar + 1.0);
                ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
            } else {
                0.0
            }
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ellipse_distance_matches_brute_force() {
        let (a, b) = (2.0, 0.5);
        for &(x, y) in &[(0.3, 0.2), (2.5, 1.0), (-1.0, -0.9), (0.0, 0.1), (1.7, 0.0), (0.0, 0.0)] {
            let p = Vec2::new(x, y);
            let brute = (0..200_000)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / 200_000.0;
                    Vec2::new(a * t.cos(), b * t.sin()).distance(p)
                })
                .fold(f64::INFINITY, f64::min);
            let sd = ellipse_signed_distance(p, a, b);
            assert!((sd.abs() - brute).abs() < 1e-6, "{p:?}: {sd} vs {brute}");
        }
        assert!(ellipse_signed_distance(Vec2::new(0.3, 0.2), a, b) < 0.0);
    }

    #[test]
    fn disk_mask_basics() {
        let g = Grid::centered(Vec2::ZERO, Vec2::new(1.3, 1.3), 1.0 / 64.0).unwrap();
        let m = DomainMask::disk(g, Vec2::ZERO, 1.0).unwrap();
        assert!(m.contains(Vec2::new(0.5, 0.5)));
        assert!(!m.contains(Vec2::new(0.9, 0.9)));
        assert!(m.check_margin(4).is_ok());
        let n = m.normal_at(Vec2::new(0.6, 0.8)).unwrap();
        assert!((n - Vec2::new(0.6, 0.8)).norm() < 1e-4);
        assert!((m.area() - PI).abs() < 1e-3);
        let tight = DomainMask::disk(g, Vec2::ZERO, 1.28).unwrap();
        assert!(tight.check_margin(4).is_err());
    }
}
