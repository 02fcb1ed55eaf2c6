//! Reinitialisation of a level-set function to a signed distance.
//!
//! Nodes next to the interface get their distance to the zero level of the
//! bicubic interpolant (closest-point iteration); the rest of the grid is
//! filled by fast sweeping.

use super::grid::Grid;
use super::scalar::{Interpolation, ScalarField};
use crate::vec2::Vec2;

/// Closest point on {φ = 0} to `x`, alternating a Newton step onto the
/// level with a projection of the offset onto the normal. Returns the
/// distance, or `None` if the iteration wanders off.
fn distance_to_zero_level(field: &ScalarField, x: Vec2, h: f64) -> Option<f64> {
    let value = |p: Vec2| field.sample(p, Interpolation::CatmullRom).ok().map(|s| s.value);
    let step = 1e-3 * h;
    let gradient = |p: Vec2| -> Option<Vec2> {
        let gx = (value(p + Vec2::new(step, 0.0))? - value(p - Vec2::new(step, 0.0))?) / (2.0 * step);
        let gy = (value(p + Vec2::new(0.0, step))? - value(p - Vec2::new(0.0, step))?) / (2.0 * step);
        Some(Vec2::new(gx, gy))
    };
    let mut p = x;
    for _ in 0..30 {
        let f = value(p)?;
        let g = gradient(p)?;
        let g2 = g.norm_sq();
        if !(g2 > 0.0) {
            return None;
        }
        let onto_level = g * (-f / g2);
        let offset = x - p;
        let tangential = offset - g * (offset.dot(g) / g2);
        let delta = onto_level + tangential;
        p += delta;
        if x.distance(p) > 2.0 * h {
            return None;
        }
        if delta.norm() < 1e-10 * h {
            break;
        }
    }
    let d = x.distance(p);
    (value(p)?.abs() < 1e-8 * h).then_some(d)
}

/// Overwrites `phi` with an approximate signed distance to its zero level.
/// Returns `false` (leaving `phi` untouched) when there is no zero level.
pub fn redistance(grid: &Grid, phi: &mut [f64]) -> bool {
    let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
    let idx = |i: usize, j: usize| j * nx + i;
    let mut dist = vec![f64::INFINITY; phi.len()];
    let mut fixed = vec![false; phi.len()];
    let field = ScalarField::new(*grid, phi.to_vec()).expect("one value per node");

    // nodes adjacent to a crossing get the distance to the line through
    // the crossings on their incident edges
    for j in 0..ny {
        for i in 0..nx {
            let k = idx(i, j);
            let p = phi[k];
            if p == 0.0 {
                dist[k] = 0.0;
                fixed[k] = true;
                continue;
            }
            let frac = |q: f64| {
                if q * p < 0.0 || q == 0.0 {
                    Some(h * p.abs() / (p.abs() + q.abs()))
                } else {
                    None
                }
            };
            let mut ax: Option<f64> = None;
            let mut ay: Option<f64> = None;
            let take = |slot: &mut Option<f64>, v: Option<f64>| {
                if let Some(v) = v {
                    *slot = Some(slot.map_or(v, |s: f64| s.min(v)));
                }
            };
            if i > 0 {
                take(&mut ax, frac(phi[idx(i - 1, j)]));
            }
            if i + 1 < nx {
                take(&mut ax, frac(phi[idx(i + 1, j)]));
            }
            if j > 0 {
                take(&mut ay, frac(phi[idx(i, j - 1)]));
            }
            if j + 1 < ny {
                take(&mut ay, frac(phi[idx(i, j + 1)]));
            }
            let linear = match (ax, ay) {
                (Some(a), Some(b)) => a * b / a.hypot(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => continue,
            };
            let d = distance_to_zero_level(&field, grid.node(i, j), h).unwrap_or(linear);
            dist[k] = d;
            fixed[k] = true;
        }
    }
    if !fixed.iter().any(|&f| f) {
        return false;
    }

    let update = |dist: &mut [f64], i: usize, j: usize| {
        let k = idx(i, j);
        if fixed[k] {
            return false;
        }
        let a = f64::min(
            if i > 0 { dist[idx(i - 1, j)] } else { f64::INFINITY },
            if i + 1 < nx { dist[idx(i + 1, j)] } else { f64::INFINITY },
        );
        let b = f64::min(
            if j > 0 { dist[idx(i, j - 1)] } else { f64::INFINITY },
            if j + 1 < ny { dist[idx(i, j + 1)] } else { f64::INFINITY },
        );
        let cand = if (a - b).abs() >= h {
            a.min(b) + h
        } else {
            0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
        };
        if cand < dist[k] {
            dist[k] = cand;
            true
        } else {
            false
        }
    };

    for _round in 0..8 {
        let mut changed = false;
        for sweep in 0..4 {
            for jj in 0..ny {
                let j = if sweep & 2 == 0 { jj } else { ny - 1 - jj };
                for ii in 0..nx {
                    let i = if sweep & 1 == 0 { ii } else { nx - 1 - ii };
                    changed |= update(&mut dist, i, j);
                }
            }
        }
        if !changed {
            break;
        }
    }

    for (p, d) in phi.iter_mut().zip(&dist) {
        *p = if *p < 0.0 { -d } else { *d };
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    #[test]
    fn restores_distance_for_squashed_circle() {
        let g = Grid::centered(Vec2::ZERO, Vec2::new(1.5, 1.5), 1.0 / 64.0).unwrap();
        // same zero set as r - 1 but with |∇φ| far from one
        let mut phi = g.map_nodes(|p| (p.norm_sq() - 1.0) * 3.0);
        assert!(redistance(&g, &mut phi));
        let mut worst = 0.0f64;
        for (k, &v) in phi.iter().enumerate() {
            let r = g.node_at(k).norm();
            if (r - 1.0).abs() < 0.3 {
                worst = worst.max((v - (r - 1.0)).abs());
            }
        }
        assert!(worst < 0.02, "worst error {worst}");
    }

    #[test]
    fn keeps_exact_distance_near_interface() {
        let g = Grid::centered(Vec2::ZERO, Vec2::new(1.5, 1.5), 1.0 / 64.0).unwrap();
        let mut phi = g.map_nodes(|p| p.norm() - 1.0);
        redistance(&g, &mut phi);
        let sd = |i: usize, j: usize| g.node(i, j).norm() - 1.0;
        let mut checked = 0;
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let exact = sd(i, j);
                let crossing = [sd(i - 1, j), sd(i + 1, j), sd(i, j - 1), sd(i, j + 1)].iter().any(|q| q * exact <= 0.0);
                if crossing {
                    checked += 1;
                    let v = phi[g.index(i, j)];
                    assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
                }
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn no_interface_is_noop() {
        let g = Grid::new(Vec2::ZERO, 0.1, 16, 16).unwrap();
        let mut phi = vec![1.0; g.len()];
        assert!(!redistance(&g, &mut phi));
        assert!(phi.iter().all(|&p| p == 1.0));
    }
}
