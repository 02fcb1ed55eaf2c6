//! Trial free-boundary iteration for −Δu = μ in Ω, u = 0 and |∇u| = 1 on ∂Ω.
//!
//! Each step solves the Dirichlet problem on the current Ω, measures the
//! Neumann defect |∇u| − 1 along ∂Ω and moves ∂Ω outward where the defect is
//! positive (inward where it is negative), then redistances φ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DomainMask, ScalarField};
use crate::geometry::ConvexBody;
use crate::measures::MeasureSpec;
use crate::poisson::{boundary_normal_derivative, solve_dirichlet_with, BoundarySample, SolverOptions};
use crate::vec2::Vec2;

/// Minimum distance from C to ∂Ω, in cells, before the iterate is rejected.
const COLLAPSE_CELLS: f64 = 4.0;
/// Consecutive residual increases (above the initial one) that count as divergence.
const DIVERGENCE_RUN: usize = 3;
/// Half-width of the band of nodes whose φ is advected, in cells.
const BAND_CELLS: f64 = 4.0;

/// Defect |∂u/∂ν| − 1 along ∂Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub samples: Vec<BoundarySample>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Arc-length weighted root mean square.
    pub l2: f64,
    pub flagged: usize,
}

pub fn overdetermined_residual(field: &ScalarField, mask: &DomainMask, n_samples: usize) -> Result<ResidualStats> {
    let samples = boundary_normal_derivative(field, mask, n_samples)?;
    let residuals: Vec<f64> = samples.iter().map(|s| s.derivative.abs() - 1.0).collect();
    let n = residuals.len().max(1) as f64;
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mean_abs = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
    let wsum: f64 = samples.iter().map(|s| s.weight).sum();
    let l2 = (samples.iter().zip(&residuals).map(|(s, r)| s.weight * r * r).sum::<f64>() / wsum).sqrt();
    let flagged = samples.iter().filter(|s| s.flagged).count();
    Ok(ResidualStats {
        samples,
        residuals,
        max_abs,
        mean_abs,
        l2,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeBoundaryParams {
    /// Relaxation factor applied to the defect.
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the largest |defect| is at or below this.
    pub stop_residual: f64,
    /// Length per unit defect; the displacement is step·defect·velocity_scale.
    pub velocity_scale: f64,
    /// Standard deviation (arc length) of the Gaussian smoothing of the
    /// normal velocity along ∂Ω. Zero disables smoothing.
    pub smoothing_length: f64,
    /// Largest displacement per iteration, in cells.
    pub max_displacement_cells: f64,
    /// Mollification radius of μ in cells.
    pub mollification_cells: f64,
    pub solver_tol: f64,
}

impl Default for FreeBoundaryParams {
    fn default() -> Self {
        FreeBoundaryParams {
            step: 0.4,
            max_iter: 200,
            stop_residual: 0.02,
            velocity_scale: 1.0,
            smoothing_length: 0.2,
            max_displacement_cells: 0.5,
            mollification_cells: 4.0,
            solver_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub max_res: f64,
    pub mean_res: f64,
}

#[derive(Debug, Clone)]
pub struct FreeBoundaryResult {
    pub mask: DomainMask,
    pub field: ScalarField,
    pub residual: ResidualStats,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl FreeBoundaryResult {
    /// Mean distance of the ∂Ω vertices from `center`.
    pub fn mean_radius(&self, center: Vec2) -> f64 {
        mean_radius(&self.mask, center)
    }
}

pub fn mean_radius(mask: &DomainMask, center: Vec2) -> f64 {
    let (sum, n) = mask
        .boundary()
        .iter()
        .flat_map(|p| p.points.iter())
        .fold((0.0, 0usize), |(s, n), p| (s + p.distance(center), n + 1));
    sum / n.max(1) as f64
}

/// Points of ∂C at which the clearance to ∂Ω is measured.
fn hull_probes(body: &ConvexBody) -> Vec<Vec2> {
    match body {
        ConvexBody::Disk { center, radius } => {
            (0..360).map(|k| *center + Vec2::from_angle(2.0 * PI * k as f64 / 360.0) * *radius).collect()
        }
        ConvexBody::Polygon { vertices } => {
            let mut out = Vec::new();
            for (k, &a) in vertices.iter().enumerate() {
                let b = vertices[(k + 1) % vertices.len()];
                out.extend((0..16).map(|s| a + (b - a) * (s as f64 / 16.0)));
            }
            out
        }
    }
}

/// min over ∂C of −φ: the distance from C to ∂Ω (negative if C ⊄ Ω).
fn clearance(mask: &DomainMask, probes: &[Vec2]) -> f64 {
    probes
        .iter()
        .map(|&p| mask.phi_at(p).map_or(f64::NEG_INFINITY, |v| -v))
        .fold(f64::INFINITY, f64::min)
}

/// Fixed-point iteration from `init_mask` toward a domain whose boundary is
/// a quadrature surface for `measure`.
pub fn solve_quadrature_surface(
    measure: &MeasureSpec,
    init_mask: &DomainMask,
    params: &FreeBoundaryParams,
) -> Result<FreeBoundaryResult> {
    if !(params.step > 0.0 && params.stop_residual > 0.0 && params.velocity_scale > 0.0) {
        return Err(Error::InvalidParameter(
            "step, stop_residual and velocity_scale must be positive".into(),
        ));
    }
    if params.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let grid = *init_mask.grid();
    let h = grid.h;
    let body = measure.support_hull()?;
    let probes = hull_probes(&body);
    let min_clearance = COLLAPSE_CELLS * h;
    if clearance(init_mask, &probes) <= min_clearance {
        return Err(Error::Precondition(
            "support hull is not strictly inside the initial domain".into(),
        ));
    }
    let rhs = measure.deposit(&grid, params.mollification_cells * h)?;
    let solver = SolverOptions {
        tol: params.solver_tol,
        ..Default::default()
    };
    let mut mask = init_mask.clone();
    mask.redistance();
    let mut field: Option<ScalarField> = None;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut rising = 0usize;
    for iter in 0..params.max_iter {
        let gap = clearance(&mask, &probes);
        if gap < min_clearance {
            return Err(Error::Collapse { clearance: gap });
        }
        mask.check_margin(2)?;
        let u = match solve_dirichlet_with(&mask, &rhs, &solver, field.as_ref()) {
            Err(Error::Precondition(_)) => return Err(Error::Collapse { clearance: gap }),
            other => other?,
        };
        let n_samples = boundary_sample_count(&mask);
        let stats = overdetermined_residual(&u, &mask, n_samples)?;
        history.push(IterationRecord {
            iter,
            max_res: stats.max_abs,
            mean_res: stats.mean_abs,
        });
        if iter > 0 {
            let (prev, first) = (history[iter - 1].max_res, history[0].max_res);
            rising = if stats.max_abs > prev && stats.max_abs > first { rising + 1 } else { 0 };
            if rising >= DIVERGENCE_RUN {
                return Err(Error::Divergence { iteration: iter, history: history.iter().map(|r| r.max_res).collect() });
            }
        }
        let converged = stats.max_abs <= params.stop_residual;
        if converged || iter + 1 == params.max_iter {
            return Ok(FreeBoundaryResult {
                mask,
                field: u,
                residual: stats,
                history,
                converged,
            });
        }
        advance(&mut mask, &stats, params);
        field = Some(u);
    }
    unreachable!("loop returns at max_iter")
}

fn boundary_sample_count(mask: &DomainMask) -> usize {
    let len: f64 = mask.boundary().iter().map(|p| p.length()).sum();
    ((len / mask.grid().h).ceil() as usize).max(64)
}

/// Moves ∂Ω by the smoothed, clamped normal velocity and redistances.
fn advance(mask: &mut DomainMask, stats: &ResidualStats, params: &FreeBoundaryParams) {
    let h = mask.grid().h;
    let limit = params.max_displacement_cells * h;
    let raw: Vec<f64> = stats
        .residuals
        .iter()
        .map(|r| if r.is_finite() { params.step * r * params.velocity_scale } else { 0.0 })
        .collect();
    let velocity: Vec<f64> = smooth_along_boundary(&stats.samples, &raw, params.smoothing_length)
        .into_iter()
        .map(|v| v.clamp(-limit, limit))
        .collect();
    let g = *mask.grid();
    let band = BAND_CELLS * h;
    let points: Vec<Vec2> = stats.samples.iter().map(|s| s.point).collect();
    let phi = mask.phi_mut();
    for (k, value) in phi.iter_mut().enumerate() {
        if value.abs() > band {
            continue;
        }
        let x = g.node_at(k);
        let nearest = points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance(x).total_cmp(&b.1.distance(x)))
            .map(|(i, _)| i);
        if let Some(i) = nearest {
            *value -= velocity[i];
        }
    }
    mask.redistance();
}

/// Periodic Gaussian smoothing of `values` over runs of consecutive samples
/// that belong to the same boundary component.
fn smooth_along_boundary(samples: &[BoundarySample], values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || samples.is_empty() {
        return values.to_vec();
    }
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < samples.len() {
        // Samples of one component share a weight and are contiguous.
        let w = samples[start].weight;
        let mut end = start + 1;
        while end < samples.len() && samples[end].weight == w && samples[end].point.distance(samples[end - 1].point) <= 2.0 * w {
            end += 1;
        }
        let n = end - start;
        let period = n as f64 * w;
        for a in 0..n {
            let (mut num, mut den) = (0.0, 0.0);
            for b in 0..n {
                let mut d = (a as f64 - b as f64).abs() * w;
                d = d.min(period - d);
                let k = (-0.5 * (d / sigma).powi(2)).exp();
                num += k * values[start + b];
                den += k;
            }
            out[start + a] = num / den;
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::oracle::annulus_solution;
    use crate::poisson::solve_dirichlet;

    fn ring() -> MeasureSpec {
        MeasureSpec::ring(Vec2::ZERO, 0.25, 2.0 * PI)
    }

    fn grid(h: f64) -> Grid {
        Grid::centered(Vec2::ZERO, Vec2::new(1.5, 1.5), h).unwrap()
    }

    #[test]
    fn residual_on_fixed_disks() {
        let h = 1.0 / 64.0;
        let g = grid(h);
        let rhs = ring().deposit(&g, 4.0 * h).unwrap();
        for (r, expected) in [(1.3, 1.0 / 1.3 - 1.0), (0.8, 0.25)] {
            let mask = DomainMask::disk(g, Vec2::ZERO, r).unwrap();
            let u = solve_dirichlet(&mask, &rhs, 1e-10).unwrap();
            let s = overdetermined_residual(&u, &mask, 256).unwrap();
            assert_eq!(s.flagged, 0);
            for res in &s.residuals {
                assert!((res - expected).abs() < 2e-2, "r {r}: {res} vs {expected}");
            }
        }
    }

    #[test]
    fn oracle_residual_is_small() {
        let exact = annulus_solution(2, 0.25, 1.0).unwrap();
        let g = grid(1.0 / 128.0);
        let mask = exact.domain_mask(g).unwrap();
        let u = exact.sample_to_grid(g).unwrap().masked(&mask);
        let s = overdetermined_residual(&u, &mask, 360).unwrap();
        assert!(s.max_abs < 2e-2, "{}", s.max_abs);
        assert!(s.l2 <= s.max_abs && s.mean_abs <= s.max_abs);
    }

    #[test]
    fn fixed_point_terminates_immediately() {
        let h = 1.0 / 64.0;
        let mask = DomainMask::disk(grid(h), Vec2::ZERO, 1.0).unwrap();
        let out = solve_quadrature_surface(&ring(), &mask, &FreeBoundaryParams::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.history.len(), 1);
        assert!(out.history[0].max_res < 2e-2);
    }

    #[test]
    fn grows_from_small_disk() {
        let h = 1.0 / 64.0;
        let mask = DomainMask::disk(grid(h), Vec2::ZERO, 0.8).unwrap();
        let out = solve_quadrature_surface(&ring(), &mask, &FreeBoundaryParams::default()).unwrap();
        assert!(out.converged, "{:?}", out.history.last());
        assert!((out.mean_radius(Vec2::ZERO) - 1.0).abs() < 2e-2, "{}", out.mean_radius(Vec2::ZERO));
    }

    #[test]
    fn hull_outside_initial_domain_is_rejected() {
        let mask = DomainMask::disk(grid(1.0 / 32.0), Vec2::ZERO, 0.2).unwrap();
        assert!(matches!(
            solve_quadrature_surface(&ring(), &mask, &FreeBoundaryParams::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn shrinking_onto_the_support_collapses() {
        // Far too much mass for the support: the boundary wants radius ≈ 0.05.
        let h = 1.0 / 64.0;
        let small = MeasureSpec::ring(Vec2::ZERO, 0.25, 0.3);
        let mask = DomainMask::disk(grid(h), Vec2::ZERO, 0.6).unwrap();
        let params = FreeBoundaryParams {
            max_iter: 400,
            ..Default::default()
        };
        assert!(matches!(solve_quadrature_surface(&small, &mask, &params), Err(Error::Collapse { .. })));
    }

    #[test]
    fn smoothing_preserves_constants() {
        let samples: Vec<BoundarySample> = (0..50)
            .map(|k| BoundarySample {
                point: Vec2::from_angle(2.0 * PI * k as f64 / 50.0),
                normal: Vec2::from_angle(2.0 * PI * k as f64 / 50.0),
                derivative: -1.0,
                weight: 2.0 * PI / 50.0,
                flagged: false,
            })
            .collect();
        let v = smooth_along_boundary(&samples, &[0.3; 50], 0.2);
        assert!(v.iter().all(|x| (x - 0.3).abs() < 1e-14));
    }
}
