use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::mask::DomainMask;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Reconstruction used between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Tensor-product Catmull-Rom cubic. Third-order accurate with a
    /// second-order accurate derivative; falls back to bilinear where the
    /// 4x4 stencil is not fully valid.
    CatmullRom,
}

/// An interpolated value and whether it relied on nodes outside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub extrapolated: bool,
}

/// A finite-difference derivative; `one_sided` marks a degraded stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative<T> {
    pub value: T,
    pub one_sided: bool,
}

/// Node values on a grid together with the set of nodes where they are
/// meaningful (the discrete domain).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ScalarField {
    /// A field meaningful at every node.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let valid = vec![true; values.len()];
        Ok(ScalarField { grid, values, valid })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec2) -> f64) -> Self {
        let values = grid.map_nodes(f);
        let valid = vec![true; values.len()];
        ScalarField { grid, values, valid }
    }

    pub fn with_valid(grid: Grid, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || valid.len() != grid.len() {
            return Err(Error::InvalidGrid("value/validity length mismatch".into()));
        }
        Ok(ScalarField { grid, values, valid })
    }

    /// Restricts validity to the closed domain of `mask` (nodes with φ ≤ 0)
    /// and zeroes values elsewhere.
    pub fn masked(mut self, mask: &DomainMask) -> Self {
        for (k, &p) in mask.phi().iter().enumerate() {
            let inside = p <= 0.0;
            self.valid[k] = inside;
            if !inside {
                self.values[k] = 0.0;
            }
        }
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    fn ok(&self, i: usize, j: usize) -> bool {
        self.valid[self.grid.index(i, j)]
    }

    /// Bilinear value at `x`; nodes outside the domain contribute their
    /// stored value (zero for masked fields) and the result is flagged.
    pub fn sample(&self, x: Vec2, mode: Interpolation) -> Result<Sample> {
        let c = self.grid.locate(x).ok_or(Error::OutsideDomain(x.x, x.y))?;
        if mode == Interpolation::CatmullRom {
            if let Some(v) = self.catmull_rom(c.i, c.j, c.fx, c.fy) {
                return Ok(Sample {
                    value: v,
                    extrapolated: false,
                });
            }
        }
        let corners = [(c.i, c.j), (c.i + 1, c.j), (c.i, c.j + 1), (c.i + 1, c.j + 1)];
        let n_ok = corners.iter().filter(|&&(i, j)| self.ok(i, j)).count();
        if n_ok == 0 {
            return Err(Error::OutsideDomain(x.x, x.y));
        }
        let v00 = self.at(c.i, c.j);
        let v10 = self.at(c.i + 1, c.j);
        let v01 = self.at(c.i, c.j + 1);
        let v11 = self.at(c.i + 1, c.j + 1);
        let value = (1.0 - c.fy) * ((1.0 - c.fx) * v00 + c.fx * v10) + c.fy * ((1.0 - c.fx) * v01 + c.fx * v11);
        Ok(Sample {
            value,
            extrapolated: n_ok < 4,
        })
    }

    /// Bilinear interpolation; exact on bilinear functions.
    pub fn interpolate(&self, x: Vec2) -> Result<f64> {
        self.sample(x, Interpolation::Bilinear).map(|s| s.value)
    }

    fn catmull_rom(&self, i: usize, j: usize, fx: f64, fy: f64) -> Option<f64> {
        if i < 1 || j < 1 || i + 2 >= self.grid.nx || j + 2 >= self.grid.ny {
            return None;
        }
        let wx = catmull_rom_weights(fx);
        let wy = catmull_rom_weights(fy);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let jj = j + b - 1;
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                let ii = i + a - 1;
                if !self.ok(ii, jj) {
                    return None;
                }
                row += wxa * self.at(ii, jj);
            }
            acc += wyb * row;
        }
        Some(acc)
    }

    /// Central differences of the bilinear interpolant with step `h`.
    /// Exact on quadratics. Near the domain edge a one-sided second-order
    /// stencil is used per axis and the result is flagged.
    pub fn gradient(&self, x: Vec2) -> Result<Derivative<Vec2>> {
        let h = self.grid.h;
        let mut one_sided = false;
        let mut comp = [0.0; 2];
        for (axis, e) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)].into_iter().enumerate() {
            let fwd = self.sample(x + e, Interpolation::Bilinear);
            let bwd = self.sample(x - e, Interpolation::Bilinear);
            match (fwd, bwd) {
                (Ok(f), Ok(b)) if !f.extrapolated && !b.extrapolated => {
                    comp[axis] = (f.value - b.value) / (2.0 * h);
                }
                _ => {
                    one_sided = true;
                    comp[axis] = self.one_sided_derivative(x, e)?;
                }
            }
        }
        Ok(Derivative {
            value: Vec2::new(comp[0], comp[1]),
            one_sided,
        })
    }

    fn one_sided_derivative(&self, x: Vec2, e: Vec2) -> Result<f64> {
        let h = e.norm();
        let clean = |p: Vec2| match self.sample(p, Interpolation::Bilinear) {
            Ok(s) if !s.extrapolated => Some(s.value),
            _ => None,
        };
        let f0 = self.sample(x, Interpolation::Bilinear)?.value;
        if let (Some(f1), Some(f2)) = (clean(x + e), clean(x + e * 2.0)) {
            return Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h));
        }
        if let (Some(f1), Some(f2)) = (clean(x - e), clean(x - e * 2.0)) {
            return Ok((3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h));
        }
        let f = self.sample(x + e, Interpolation::Bilinear)?.value;
        let b = self.sample(x - e, Interpolation::Bilinear)?.value;
        Ok((f - b) / (2.0 * h))
    }

    /// Five-point Laplacian of the bilinear interpolant with step `h`.
    pub fn laplacian(&self, x: Vec2) -> Result<Derivative<f64>> {
        let h = self.grid.h;
        let pts = [
            x,
            x + Vec2::new(h, 0.0),
            x - Vec2::new(h, 0.0),
            x + Vec2::new(0.0, h),
            x - Vec2::new(0.0, h),
        ];
        let mut vals = [0.0; 5];
        let mut one_sided = false;
        for (v, p) in vals.iter_mut().zip(pts) {
            let s = self.sample(p, Interpolation::Bilinear)?;
            one_sided |= s.extrapolated;
            *v = s.value;
        }
        Ok(Derivative {
            value: (vals[1] + vals[2] + vals[3] + vals[4] - 4.0 * vals[0]) / (h * h),
            one_sided,
        })
    }

    /// w = |∇u|² at every node from central differences; valid where the
    /// four neighbours are valid.
    pub fn grad_norm_sq(&self) -> ScalarField {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        let mut valid = vec![false; g.len()];
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                if !(self.ok(i, j) && self.ok(i - 1, j) && self.ok(i + 1, j) && self.ok(i, j - 1) && self.ok(i, j + 1)) {
                    continue;
                }
                let gx = (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * g.h);
                let gy = (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * g.h);
                let k = g.index(i, j);
                values[k] = gx * gx + gy * gy;
                valid[k] = true;
            }
        }
        ScalarField { grid: g, values, valid }
    }

    /// Maximum over valid nodes and the node where it is attained (first in
    /// storage order on ties).
    pub fn max_value(&self) -> Option<(f64, Vec2)> {
        let mut best: Option<(f64, usize)> = None;
        for (k, (&v, &ok)) in self.values.iter().zip(&self.valid).enumerate() {
            if ok && best.map_or(true, |(b, _)| v > b) {
                best = Some((v, k));
            }
        }
        best.map(|(v, k)| (v, self.grid.node_at(k)))
    }

    pub fn scaled(&self, alpha: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * alpha).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// Δw at `x` for w = |∇u|², the quantity compared against 2‖D²u‖².
pub fn laplacian_of_w(field: &ScalarField, x: Vec2) -> Result<Derivative<f64>> {
    field.grad_norm_sq().laplacian(x)
}

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}
