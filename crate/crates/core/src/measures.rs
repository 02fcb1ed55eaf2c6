//! The source measure μ: description, total mass, support hull and
//! mass-conservative deposition on a grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::geometry::ConvexBody;
use crate::vec2::Vec2;

/// Subsamples per cell width when spreading a circle measure.
const CIRCLE_POINTS_PER_CELL: f64 = 16.0;
/// Sides of the circumscribed polygon standing in for a circle in a hull.
const CIRCLE_HULL_SIDES: usize = 128;
/// Subcells per axis when averaging a region over a grid cell.
const REGION_SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec2,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformCircle {
    pub center: Vec2,
    pub radius: f64,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformRegion {
    pub shape: ConvexBody,
    pub total_mass: f64,
}

/// A positive measure with bounded support in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub dim: usize,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub uniform_circles: Vec<UniformCircle>,
    #[serde(default)]
    pub uniform_regions: Vec<UniformRegion>,
}

/// Density (mass per unit area) at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMeasure {
    pub grid: Grid,
    pub density: Vec<f64>,
}

impl DiscretizedMeasure {
    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.h * self.grid.h
    }

    pub fn scaled(&self, alpha: f64) -> DiscretizedMeasure {
        DiscretizedMeasure {
            grid: self.grid,
            density: self.density.iter().map(|d| d * alpha).collect(),
        }
    }
}

impl MeasureSpec {
    pub fn ring(center: Vec2, radius: f64, total_mass: f64) -> Self {
        MeasureSpec {
            dim: 2,
            atoms: Vec::new(),
            uniform_circles: vec![UniformCircle {
                center,
                radius,
                total_mass,
            }],
            uniform_regions: Vec::new(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: MeasureSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(Error::InvalidMeasure(format!("only dim = 2 is supported, got {}", self.dim)));
        }
        if self.atoms.is_empty() && self.uniform_circles.is_empty() && self.uniform_regions.is_empty() {
            return Err(Error::InvalidMeasure("measure has no components".into()));
        }
        let positive = |m: f64| m > 0.0 && m.is_finite();
        for a in &self.atoms {
            if !positive(a.mass) || !a.x.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom mass must be positive, got {}", a.mass)));
            }
        }
        for c in &self.uniform_circles {
            if !positive(c.total_mass) {
                return Err(Error::InvalidMeasure(format!("circle mass must be positive, got {}", c.total_mass)));
            }
            if !positive(c.radius) || !c.center.is_finite() {
                return Err(Error::InvalidMeasure(format!("circle radius must be positive, got {}", c.radius)));
            }
        }
        for r in &self.uniform_regions {
            if !positive(r.total_mass) {
                return Err(Error::InvalidMeasure(format!("region mass must be positive, got {}", r.total_mass)));
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.uniform_circles.iter().map(|c| c.total_mass).sum::<f64>()
            + self.uniform_regions.iter().map(|r| r.total_mass).sum::<f64>())
    }

    /// C = conv(supp μ) as a disk when one round component contains all the
    /// others, otherwise as a polygon (circles enter through circumscribed
    /// polygons, so the result always contains the support).
    pub fn support_hull(&self) -> Result<ConvexBody> {
        self.validate()?;
        let mut rounds: Vec<(Vec2, f64)> = self.uniform_circles.iter().map(|c| (c.center, c.radius)).collect();
        for r in &self.uniform_regions {
            if let ConvexBody::Disk { center, radius } = r.shape {
                rounds.push((center, radius));
            }
        }
        let points = self.support_points();
        if let Some(&(center, radius)) = rounds.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
            let tol = 1e-12 * radius;
            let contains_round = rounds.iter().all(|&(c, r)| c.distance(center) + r <= radius + tol);
            let contains_points = points.iter().all(|p| p.distance(center) <= radius + tol);
            if contains_round && contains_points {
                return ConvexBody::disk(center, radius);
            }
        }
        let mut all = points;
        for &(c, r) in &rounds {
            let rr = r / (PI / CIRCLE_HULL_SIDES as f64).cos();
            all.extend((0..CIRCLE_HULL_SIDES).map(|k| c + Vec2::from_angle(2.0 * PI * k as f64 / CIRCLE_HULL_SIDES as f64) * rr));
        }
        let hull = convex_hull(all);
        if hull.len() < 3 {
            return Err(Error::DegenerateHull(format!(
                "hull of the support has {} extreme point(s)",
                hull.len()
            )));
        }
        ConvexBody::polygon(hull).map_err(|e| Error::DegenerateHull(e.to_string()))
    }

    fn support_points(&self) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = self.atoms.iter().map(|a| a.x).collect();
        for r in &self.uniform_regions {
            if let ConvexBody::Polygon { vertices } = &r.shape {
                pts.extend(vertices.iter().copied());
            }
        }
        pts
    }

    /// Spreads μ over `grid`. Atoms and circle subsamples become quartic
    /// bumps (1 − (s/ε)²)² of radius ε normalized on the grid to their exact
    /// mass; regions are cell-averaged and renormalized.
    pub fn deposit(&self, grid: &Grid, mollification_radius: f64) -> Result<DiscretizedMeasure> {
        self.validate()?;
        let h = grid.h;
        if !(mollification_radius >= 2.0 * h - 1e-12 * h) {
            return Err(Error::InvalidParameter(format!(
                "mollification radius {mollification_radius} must be at least 2h = {}",
                2.0 * h
            )));
        }
        let mut density = vec![0.0; grid.len()];
        for a in &self.atoms {
            deposit_bump(grid, &mut density, a.x, a.mass, mollification_radius)?;
        }
        for c in &self.uniform_circles {
            let n = ((2.0 * PI * c.radius) / (h / CIRCLE_POINTS_PER_CELL)).ceil().max(16.0) as usize;
            let m = c.total_mass / n as f64;
            for k in 0..n {
                let p = c.center + Vec2::from_angle(2.0 * PI * k as f64 / n as f64) * c.radius;
                deposit_bump(grid, &mut density, p, m, mollification_radius)?;
            }
        }
        for r in &self.uniform_regions {
            deposit_region(grid, &mut density, &r.shape, r.total_mass)?;
        }
        Ok(DiscretizedMeasure { grid: *grid, density })
    }
}

fn deposit_bump(grid: &Grid, density: &mut [f64], p: Vec2, mass: f64, eps: f64) -> Result<()> {
    let h = grid.h;
    let lo = p - Vec2::new(eps, eps);
    let hi = p + Vec2::new(eps, eps);
    if !(grid.contains(lo) && grid.contains(hi)) {
        return Err(Error::OutOfGrid);
    }
    let i0 = ((lo.x - grid.origin.x) / h).floor() as usize;
    let j0 = ((lo.y - grid.origin.y) / h).floor() as usize;
    let i1 = (((hi.x - grid.origin.x) / h).ceil() as usize).min(grid.nx - 1);
    let j1 = (((hi.y - grid.origin.y) / h).ceil() as usize).min(grid.ny - 1);
    let mut weights = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
    let mut sum = 0.0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let s2 = grid.node(i, j).distance(p).powi(2) / (eps * eps);
            if s2 < 1.0 {
                let w = (1.0 - s2) * (1.0 - s2);
                sum += w;
                weights.push((grid.index(i, j), w));
            }
        }
    }
    if sum <= 0.0 {
        return Err(Error::InvalidParameter("mollifier does not cover any node".into()));
    }
    let scale = mass / (sum * h * h);
    for (k, w) in weights {
        density[k] += w * scale;
    }
    Ok(())
}

fn deposit_region(grid: &Grid, density: &mut [f64], shape: &ConvexBody, mass: f64) -> Result<()> {
    let h = grid.h;
    let (lo, hi) = shape.bounding_box();
    let pad = Vec2::new(h, h);
    if !(grid.contains(lo - pad) && grid.contains(hi + pad)) {
        return Err(Error::OutOfGrid);
    }
    let i0 = ((lo.x - grid.origin.x) / h).floor() as usize;
    let j0 = ((lo.y - grid.origin.y) / h).floor() as usize;
    let i1 = ((hi.x - grid.origin.x) / h).ceil() as usize + 1;
    let j1 = ((hi.y - grid.origin.y) / h).ceil() as usize + 1;
    let n = REGION_SUBSAMPLES;
    let mut fracs = Vec::new();
    let mut covered = 0.0;
    for j in j0..=j1.min(grid.ny - 1) {
        for i in i0..=i1.min(grid.nx - 1) {
            let c = grid.node(i, j);
            let mut hits = 0usize;
            for b in 0..n {
                for a in 0..n {
                    let q = c + Vec2::new(((a as f64 + 0.5) / n as f64 - 0.5) * h, ((b as f64 + 0.5) / n as f64 - 0.5) * h);
                    if shape.contains(q) {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let f = hits as f64 / (n * n) as f64;
                covered += f;
                fracs.push((grid.index(i, j), f));
            }
        }
    }
    if covered <= 0.0 {
        return Err(Error::InvalidMeasure("region is smaller than a grid cell sample".into()));
    }
    let scale = mass / (covered * h * h);
    for (k, f) in fracs {
        density[k] += f * scale;
    }
    Ok(())
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
