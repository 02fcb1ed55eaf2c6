//! Closed-form radial solutions of the overdetermined problem.
//!
//! With μ the uniform measure on the sphere of radius ρ and Ω the ball of
//! radius R, normalized so that |∇u| = 1 on ∂Ω:
//!
//! * N = 2: u(r) = R ln(R/r) on [ρ, R]
//! * N ≥ 3: u(r) = R^(N−1)/(N−2) (r^(2−N) − R^(2−N)) on [ρ, R]
//!
//! and u is constant (= u(ρ)) inside the sphere. The total mass is the
//! flux |∂Ω| = |S^(N−1)| R^(N−1).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{DomainMask, Grid, ScalarField};
use crate::geometry::ConvexBody;
use crate::measures::MeasureSpec;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSolution {
    dim: usize,
    rho: f64,
    outer: f64,
}

impl RadialSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    /// u as a function of the distance to the centre. Continues analytically
    /// past R (negative values).
    pub fn u_radial(&self, r: f64) -> f64 {
        let r = r.max(self.rho);
        let big_r = self.outer;
        match self.dim {
            2 => big_r * (big_r / r).ln(),
            n => {
                let k = (2 - n as i32) as f64;
                big_r.powi(n as i32 - 1) / (n as f64 - 2.0) * (r.powf(k) - big_r.powf(k))
            }
        }
    }

    /// du/dr; zero inside the support sphere.
    pub fn du_dr(&self, r: f64) -> f64 {
        if r < self.rho {
            return 0.0;
        }
        -(self.outer / r).powi(self.dim as i32 - 1)
    }

    pub fn u_at(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.u_radial(norm(x)))
    }

    pub fn grad_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let r = norm(x);
        if r == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let s = self.du_dr(r) / r;
        Ok(x.iter().map(|c| c * s).collect())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, solution has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn u(&self, x: Vec2) -> f64 {
        self.u_radial(x.norm())
    }

    pub fn grad(&self, x: Vec2) -> Vec2 {
        let r = x.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        x * (self.du_dr(r) / r)
    }

    /// max u, attained on the closed support ball.
    pub fn max_value(&self) -> f64 {
        self.u_radial(self.rho)
    }

    /// d(c) for every c on the support sphere.
    pub fn extent(&self) -> f64 {
        self.outer - self.rho
    }

    /// Radius of the level sphere {u = t}.
    pub fn level_radius(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.max_value()).contains(&t) {
            return Err(Error::LevelAboveRay {
                level: t,
                start: self.max_value(),
            });
        }
        let big_r = self.outer;
        Ok(match self.dim {
            2 => big_r * (-t / big_r).exp(),
            n => {
                let k = (2 - n as i32) as f64;
                (t * (n as f64 - 2.0) / big_r.powi(n as i32 - 1) + big_r.powf(k)).powf(1.0 / k)
            }
        })
    }

    /// d_t(c) = level radius − ρ.
    pub fn level_thickness(&self, t: f64) -> Result<f64> {
        Ok(self.level_radius(t)? - self.rho)
    }

    /// |∇u| on the level set {u = t}.
    pub fn grad_norm_on_level(&self, t: f64) -> Result<f64> {
        Ok(-self.du_dr(self.level_radius(t)?))
    }

    /// ∂d_t/∂t = −1/|∇u| on the level set.
    pub fn thickness_slope(&self, t: f64) -> Result<f64> {
        Ok(-1.0 / self.grad_norm_on_level(t)?)
    }

    pub fn total_mass(&self) -> f64 {
        unit_sphere_area(self.dim) * self.outer.powi(self.dim as i32 - 1)
    }

    /// The 2-D measure realizing this solution: the uniform circle of radius
    /// ρ carrying mass 2πR.
    pub fn measure(&self) -> Result<MeasureSpec> {
        self.require_planar()?;
        Ok(MeasureSpec::ring(Vec2::ZERO, self.rho, self.total_mass()))
    }

    pub fn body(&self) -> Result<ConvexBody> {
        self.require_planar()?;
        ConvexBody::disk(Vec2::ZERO, self.rho)
    }

    pub fn domain_mask(&self, grid: Grid) -> Result<DomainMask> {
        self.require_planar()?;
        DomainMask::disk(grid, Vec2::ZERO, self.outer)
    }

    /// Nodewise closed form on a 2-D grid; every node is valid.
    pub fn sample_to_grid(&self, grid: Grid) -> Result<ScalarField> {
        if self.dim != 2 {
            return Err(Error::Unsupported(format!(
                "grid sampling needs dimension 2, solution has dimension {}",
                self.dim
            )));
        }
        Ok(ScalarField::from_fn(grid, |p| self.u(p)))
    }

    fn require_planar(&self) -> Result<()> {
        if self.dim == 2 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("dimension {} has no planar realization", self.dim)))
        }
    }
}

/// The analytic annulus solution of dimension `dim`.
pub fn annulus_solution(dim: usize, rho: f64, outer: f64) -> Result<RadialSolution> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {dim}")));
    }
    if !(rho > 0.0 && rho < outer && outer.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < rho < R, got rho = {rho}, R = {outer}")));
    }
    Ok(RadialSolution { dim, rho, outer })
}

/// Grid covering the disk of radius R with an 8-cell margin.
pub fn oracle_grid(outer: f64, h: f64) -> Result<Grid> {
    let half = outer + 8.0 * h;
    Grid::centered(Vec2::ZERO, Vec2::new(half, half), h)
}

/// |S^(N−1)| = 2 π^(N/2) / Γ(N/2).
fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// Γ(n/2) for positive integers n.
fn gamma_half_integer(n: usize) -> f64 {
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while x < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}
