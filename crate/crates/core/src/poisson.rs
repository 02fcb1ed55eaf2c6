//! Dirichlet problem −Δu = f in Ω, u = 0 on ∂Ω on a masked grid.
//!
//! Nodes with φ < 0 are unknowns. Where a grid edge crosses ∂Ω the missing
//! neighbour is replaced by the boundary point at fraction θ of the edge
//! (Shortley–Weller), which keeps the scheme second order up to a curved
//! boundary. The resulting matrix is an M-matrix but not symmetric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{DomainMask, Grid, Interpolation, ScalarField};
use crate::measures::DiscretizedMeasure;
use crate::vec2::Vec2;

/// Smallest boundary fraction kept in a cut-cell stencil.
const MIN_THETA: f64 = 1e-3;
/// Fraction of dropped fill-in lumped onto the diagonal of the incomplete
/// factorization (0 is ILU(0), 1 is fully modified ILU).
const MILU_RELAXATION: f64 = 0.95;
// Stencil slots.
const WEST: usize = 0;
const EAST: usize = 1;
const SOUTH: usize = 2;
const NORTH: usize = 3;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual ‖b − Ax‖/‖b‖ at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// A point of ∂Ω with the outward normal derivative of u there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: Vec2,
    /// Outward unit normal ∇φ/|∇φ|.
    pub normal: Vec2,
    pub derivative: f64,
    /// Arc length of ∂Ω represented by this sample.
    pub weight: f64,
    /// Fewer than three interior cells along the inward normal.
    pub flagged: bool,
}

/// Row-scaled (by h²) cut-cell Laplacian over the interior nodes.
struct System {
    /// Grid index of each unknown.
    nodes: Vec<usize>,
    diag: Vec<f64>,
    nbr: Vec<[usize; 4]>,
    coef: Vec<[f64; 4]>,
    /// Inverse pivots of the incomplete factorization (D + L) D⁻¹ (D + U).
    inv_pivot: Vec<f64>,
}

impl System {
    fn assemble(mask: &DomainMask) -> System {
        let g = *mask.grid();
        let phi = mask.phi();
        let mut slot = vec![NONE; g.len()];
        let mut nodes = Vec::new();
        for (k, &p) in phi.iter().enumerate() {
            if p < 0.0 {
                slot[k] = nodes.len();
                nodes.push(k);
            }
        }
        let mut diag = Vec::with_capacity(nodes.len());
        let mut nbr = Vec::with_capacity(nodes.len());
        let mut coef = Vec::with_capacity(nodes.len());
        for &k in &nodes {
            let (i, j) = (k % g.nx, k / g.nx);
            // (minus, plus) neighbours along x, then along y.
            let around = [
                neighbour(&g, i, j, -1, 0),
                neighbour(&g, i, j, 1, 0),
                neighbour(&g, i, j, 0, -1),
                neighbour(&g, i, j, 0, 1),
            ];
            let mut theta = [1.0; 4];
            for (d, n) in around.iter().enumerate() {
                theta[d] = match n {
                    Some(m) if phi[*m] < 0.0 => 1.0,
                    Some(m) => (phi[k] / (phi[k] - phi[*m])).clamp(MIN_THETA, 1.0),
                    None => MIN_THETA,
                };
            }
            let mut d = 0.0;
            let mut nb = [NONE; 4];
            let mut c = [0.0; 4];
            for axis in 0..2 {
                let (tm, tp) = (theta[2 * axis], theta[2 * axis + 1]);
                d += 2.0 / (tm * tp);
                for (side, t_this, t_other) in [(2 * axis, tm, tp), (2 * axis + 1, tp, tm)] {
                    if let Some(m) = around[side] {
                        if phi[m] < 0.0 {
                            nb[side] = slot[m];
                            c[side] = -2.0 / (t_this * (t_this + t_other));
                        }
                    }
                }
            }
            diag.push(d);
            nbr.push(nb);
            coef.push(c);
        }
        let inv_pivot = factorize(&diag, &nbr, &coef).iter().map(|p| 1.0 / p).collect();
        System {
            nodes,
            diag,
            nbr,
            coef,
            inv_pivot,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = self.diag[r] * x[r];
            for s in 0..4 {
                let n = self.nbr[r][s];
                if n != NONE {
                    acc += self.coef[r][s] * x[n];
                }
            }
            *out = acc;
        });
    }

    /// y = M⁻¹x by a forward and a backward sweep. Unknowns are in grid
    /// order, so west and south neighbours precede a node.
    fn precondition(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..x.len() {
            let mut acc = x[r];
            for s in [WEST, SOUTH] {
                let n = self.nbr[r][s];
                if n != NONE {
                    acc -= self.coef[r][s] * y[n];
                }
            }
            y[r] = acc * self.inv_pivot[r];
        }
        for r in (0..x.len()).rev() {
            let mut acc = 0.0;
            for s in [EAST, NORTH] {
                let n = self.nbr[r][s];
                if n != NONE {
                    acc += self.coef[r][s] * y[n];
                }
            }
            y[r] -= acc * self.inv_pivot[r];
        }
    }
}

fn factorize(diag: &[f64], nbr: &[[usize; 4]], coef: &[[f64; 4]]) -> Vec<f64> {
    let mut pivot = vec![0.0; diag.len()];
    for r in 0..diag.len() {
        let mut d = diag[r];
        // (lower slot, upper slot kept, upper slot dropped as fill-in)
        for (lower, kept, dropped) in [(WEST, EAST, NORTH), (SOUTH, NORTH, EAST)] {
            let n = nbr[r][lower];
            if n != NONE {
                let l = coef[r][lower] / pivot[n];
                d -= l * coef[n][kept];
                d -= MILU_RELAXATION * l * coef[n][dropped];
            }
        }
        // Guard against a vanishing pivot at badly cut cells.
        pivot[r] = if d > 1e-2 * diag[r] { d } else { diag[r] };
    }
    pivot
}

fn neighbour(g: &Grid, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
    let ni = i as isize + di;
    let nj = j as isize + dj;
    if ni < 0 || nj < 0 || ni >= g.nx as isize || nj >= g.ny as isize {
        None
    } else {
        Some(g.index(ni as usize, nj as usize))
    }
}

/// Fixed-order inner product, so results do not depend on thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB.
fn bicgstab(sys: &System, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<usize> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = opts.tol * bnorm;
    let mut r = vec![0.0; n];
    sys.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut history = vec![norm(&r) / bnorm];
    if history[0] <= opts.tol {
        return Ok(0);
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // Breakdown: restart from the current residual.
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|v| *v = 0.0);
            v.iter_mut().for_each(|v| *v = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        sys.precondition(&p, &mut y);
        sys.apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let snorm = norm(&s);
        if snorm <= target {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            return Ok(it);
        }
        sys.precondition(&s, &mut z);
        sys.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel <= opts.tol {
            return Ok(it);
        }
    }
    Err(Error::SolverFailure {
        iterations: history.len() - 1,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Solves −Δu = rhs in Ω with u = 0 on ∂Ω to relative residual `tol`.
pub fn solve_dirichlet(mask: &DomainMask, rhs: &DiscretizedMeasure, tol: f64) -> Result<ScalarField> {
    solve_dirichlet_with(mask, rhs, &SolverOptions { tol, ..Default::default() }, None)
}

/// As [`solve_dirichlet`], optionally warm-started from `guess` (read at
/// nodes that are interior in `mask`).
pub fn solve_dirichlet_with(
    mask: &DomainMask,
    rhs: &DiscretizedMeasure,
    opts: &SolverOptions,
    guess: Option<&ScalarField>,
) -> Result<ScalarField> {
    let g = *mask.grid();
    if rhs.grid != g {
        return Err(Error::InvalidGrid("right-hand side and mask grids differ".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let phi = mask.phi();
    let clearance = 2.0 * g.h;
    if let Some(k) = (0..g.len()).find(|&k| rhs.density[k] != 0.0 && phi[k] > -clearance) {
        let p = g.node_at(k);
        return Err(Error::Precondition(format!(
            "source is nonzero at ({:.4}, {:.4}), within {clearance} of the boundary",
            p.x, p.y
        )));
    }
    let sys = System::assemble(mask);
    let h2 = g.h * g.h;
    let b: Vec<f64> = sys.nodes.iter().map(|&k| rhs.density[k] * h2).collect();
    let mut x: Vec<f64> = match guess {
        Some(f) if f.grid() == &g => sys.nodes.iter().map(|&k| f.values()[k]).collect(),
        _ => vec![0.0; sys.nodes.len()],
    };
    bicgstab(&sys, &b, &mut x, opts)?;
    let mut values = vec![0.0; g.len()];
    for (r, &k) in sys.nodes.iter().enumerate() {
        values[k] = x[r];
    }
    let valid = phi.iter().map(|&p| p <= 0.0).collect();
    ScalarField::with_valid(g, values, valid)
}

/// ∂u/∂ν at `n_samples` points of ∂Ω equally spaced in arc length.
///
/// Along the inward normal a quadratic through u = 0 at the boundary and the
/// interpolated values at depths 2h and 3h gives a second-order one-sided
/// derivative.
pub fn boundary_normal_derivative(field: &ScalarField, mask: &DomainMask, n_samples: usize) -> Result<Vec<BoundarySample>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one boundary sample".into()));
    }
    if field.grid() != mask.grid() {
        return Err(Error::InvalidGrid("field and mask grids differ".into()));
    }
    let h = mask.grid().h;
    let boundary = mask.boundary();
    let total: f64 = boundary.iter().map(|p| p.length()).sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("domain has no boundary".into()));
    }
    let mut points = Vec::with_capacity(n_samples);
    let mut assigned = 0;
    for (idx, poly) in boundary.iter().enumerate() {
        let len = poly.length();
        let n = if idx + 1 == boundary.len() {
            n_samples - assigned
        } else {
            ((n_samples as f64 * len / total).round() as usize).min(n_samples - assigned)
        };
        assigned += n;
        if n > 0 {
            points.extend(poly.resample(n).into_iter().map(|(p, _)| (p, len / n as f64)));
        }
    }
    let (s1, s2) = (2.0 * h, 3.0 * h);
    points
        .into_par_iter()
        .map(|(p, weight)| {
            let normal = mask.normal_at(p)?;
            let mut flagged = (1..=3).any(|k| mask.phi_at(p - normal * (k as f64 * h)).map_or(true, |v| v >= 0.0));
            let mut value = |s: f64| -> f64 {
                match field.sample(p - normal * s, Interpolation::CatmullRom) {
                    Ok(v) => {
                        flagged |= v.extrapolated;
                        v.value
                    }
                    Err(_) => {
                        flagged = true;
                        f64::NAN
                    }
                }
            };
            let f1 = value(s1);
            let f2 = value(s2);
            let inward = (f1 * s2 * s2 - f2 * s1 * s1) / (s1 * s2 * (s2 - s1));
            Ok(BoundarySample {
                point: p,
                normal,
                derivative: -inward,
                weight,
                flagged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;
    use crate::oracle::{annulus_solution, oracle_grid};
    use std::f64::consts::PI;

    fn ring_problem(outer: f64, h: f64) -> (DomainMask, DiscretizedMeasure, Grid) {
        let g = oracle_grid(outer, h).unwrap();
        let mask = DomainMask::disk(g, Vec2::ZERO, outer).unwrap();
        let rhs = MeasureSpec::ring(Vec2::ZERO, 0.25, 2.0 * PI).deposit(&g, 4.0 * h).unwrap();
        (mask, rhs, g)
    }

    #[test]
    fn zero_source_gives_zero() {
        let (mask, rhs, _) = ring_problem(1.0, 1.0 / 32.0);
        let u = solve_dirichlet(&mask, &rhs.scaled(0.0), 1e-10).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        let d = boundary_normal_derivative(&u, &mask, 64).unwrap();
        assert!(d.iter().all(|s| s.derivative == 0.0));
    }

    #[test]
    fn constant_source_on_disk_is_quadratic() {
        // −Δu = 4 on the unit disk: u = 1 − r², reproduced up to rounding.
        let h = 1.0 / 32.0;
        let g = oracle_grid(1.0, h).unwrap();
        let mask = DomainMask::disk(g, Vec2::ZERO, 1.0).unwrap();
        let density = g.map_nodes(|p| if p.norm() < 1.0 - h { 4.0 } else { 0.0 });
        let rhs = DiscretizedMeasure { grid: g, density };
        assert!(matches!(solve_dirichlet(&mask, &rhs, 1e-10), Err(Error::Precondition(_))));
        let density = g.map_nodes(|p| if p.norm() < 1.0 { 4.0 } else { 0.0 });
        let sys = System::assemble(&mask);
        let b: Vec<f64> = sys.nodes.iter().map(|&k| density[k] * h * h).collect();
        let mut x = vec![0.0; b.len()];
        bicgstab(&sys, &b, &mut x, &SolverOptions::default()).unwrap();
        let err = sys
            .nodes
            .iter()
            .zip(&x)
            .map(|(&k, v)| (v - (1.0 - g.node_at(k).norm_sq())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "err {err}");
    }

    #[test]
    fn oracle_accuracy_and_flux() {
        let h = 1.0 / 64.0;
        let (mask, rhs, g) = ring_problem(1.0, h);
        let u = solve_dirichlet(&mask, &rhs, 1e-10).unwrap();
        let exact = annulus_solution(2, 0.25, 1.0).unwrap();
        let band = 4.0 * h + 2.0 * h;
        let mut err: f64 = 0.0;
        for k in 0..g.len() {
            let p = g.node_at(k);
            if mask.phi()[k] < 0.0 && (p.norm() - 0.25).abs() > band {
                err = err.max((u.values()[k] - exact.u(p)).abs());
            }
        }
        assert!(err < 2e-2, "err {err}");
        assert!(u.values().iter().all(|&v| v >= 0.0));
        let d = boundary_normal_derivative(&u, &mask, 256).unwrap();
        let flux: f64 = d.iter().map(|s| -s.derivative * s.weight).sum();
        assert!((flux - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "flux {flux}");
        assert!(d.iter().all(|s| !s.flagged && (s.derivative + 1.0).abs() < 2e-2));
    }

    #[test]
    fn linearity() {
        let (mask, rhs, _) = ring_problem(1.0, 1.0 / 32.0);
        let u = solve_dirichlet(&mask, &rhs, 1e-12).unwrap();
        let v = solve_dirichlet(&mask, &rhs.scaled(3.0), 1e-12).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((3.0 * a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_derivative_on_oracle_field() {
        let exact = annulus_solution(2, 0.25, 1.0).unwrap();
        let g = oracle_grid(1.0, 1.0 / 128.0).unwrap();
        let mask = exact.domain_mask(g).unwrap();
        let u = exact.sample_to_grid(g).unwrap().masked(&mask);
        let d = boundary_normal_derivative(&u, &mask, 360).unwrap();
        assert_eq!(d.len(), 360);
        for s in &d {
            assert!((s.derivative + 1.0).abs() < 2e-2, "{}", s.derivative);
            assert!((s.normal.dot(s.point.normalized().unwrap()) - 1.0).abs() < 1e-3);
        }
    }
}
