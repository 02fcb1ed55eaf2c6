use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Uniform node-centred grid. Node `(i, j)` sits at `origin + h * (i, j)`
/// and is stored at index `j * nx + i` (row-major, rows along y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Location of a point inside a grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CellPos {
    pub i: usize,
    pub j: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Grid {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if nx < 16 || ny < 16 {
            return Err(Error::InvalidGrid(format!("need at least 16x16 nodes, got {nx}x{ny}")));
        }
        Ok(Grid { origin, h, nx, ny })
    }

    /// Smallest grid with a node at `center` covering the box
    /// `center ± half_extent`.
    pub fn centered(center: Vec2, half_extent: Vec2, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let kx = (half_extent.x / h).ceil().max(8.0) as usize;
        let ky = (half_extent.y / h).ceil().max(8.0) as usize;
        Grid::new(
            center - Vec2::new(kx as f64 * h, ky as f64 * h),
            h,
            2 * kx + 1,
            2 * ky + 1,
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.origin.x + i as f64 * self.h, self.origin.y + j as f64 * self.h)
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> Vec2 {
        self.node(idx % self.nx, idx / self.nx)
    }

    pub fn max_corner(&self) -> Vec2 {
        self.node(self.nx - 1, self.ny - 1)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let hi = self.max_corner();
        x.x >= self.origin.x && x.y >= self.origin.y && x.x <= hi.x && x.y <= hi.y
    }

    pub(crate) fn locate(&self, x: Vec2) -> Option<CellPos> {
        let gx = (x.x - self.origin.x) / self.h;
        let gy = (x.y - self.origin.y) / self.h;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(gx >= 0.0 && gy >= 0.0 && gx <= mx && gy <= my) {
            return None;
        }
        let i = (gx.floor() as usize).min(self.nx - 2);
        let j = (gy.floor() as usize).min(self.ny - 2);
        Some(CellPos {
            i,
            j,
            fx: gx - i as f64,
            fy: gy - j as f64,
        })
    }

    /// Evaluates `f` at every node.
    pub fn map_nodes(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.node_at(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_grid_has_node_at_center() {
        let g = Grid::centered(Vec2::new(0.0, 0.0), Vec2::new(1.1, 1.1), 1.0 / 64.0).unwrap();
        let mid = g.node(g.nx / 2, g.ny / 2);
        assert_eq!(mid, Vec2::ZERO);
        assert!(g.contains(Vec2::new(1.1, -1.1)));
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(Vec2::ZERO, 0.1, 8, 32).is_err());
        assert!(Grid::new(Vec2::ZERO, 0.0, 32, 32).is_err());
    }

    #[test]
    fn locate_clamps_last_cell() {
        let g = Grid::new(Vec2::ZERO, 1.0, 16, 16).unwrap();
        let c = g.locate(Vec2::new(15.0, 15.0)).unwrap();
        assert_eq!((c.i, c.j), (14, 14));
        assert_eq!((c.fx, c.fy), (1.0, 1.0));
        assert!(g.locate(Vec2::new(-0.1, 3.0)).is_none());
    }
}
