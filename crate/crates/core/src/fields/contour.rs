use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::scalar::ScalarField;
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    /// Closed polylines do not repeat their first point.
    pub closed: bool,
}

impl Polyline {
    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.points.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(b)).sum()
    }

    /// Shoelace area, positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|k| self.points[k].cross(self.points[(k + 1) % n]))
            .sum::<f64>()
    }

    pub fn distance_to(&self, x: Vec2) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].distance(x);
        }
        self.segments()
            .map(|(a, b)| {
                let e = b - a;
                let l2 = e.norm_sq();
                let t = if l2 > 0.0 { ((x - a).dot(e) / l2).clamp(0.0, 1.0) } else { 0.0 };
                (a + e * t).distance(x)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `n` points equally spaced in arc length, each with the unit tangent.
    pub fn resample(&self, n: usize) -> Vec<(Vec2, Vec2)> {
        let total = self.length();
        if n == 0 || total <= 0.0 {
            return Vec::new();
        }
        let step = if self.closed { total / n as f64 } else { total / (n.max(2) - 1) as f64 };
        let mut out = Vec::with_capacity(n);
        let mut segs = self.segments().peekable();
        let mut acc = 0.0;
        let Some(mut seg) = segs.next() else { return out };
        for k in 0..n {
            let target = k as f64 * step;
            loop {
                let len = seg.0.distance(seg.1);
                if target <= acc + len || segs.peek().is_none() {
                    let t = if len > 0.0 { ((target - acc) / len).clamp(0.0, 1.0) } else { 0.0 };
                    let tangent = (seg.1 - seg.0).normalized().unwrap_or(Vec2::new(1.0, 0.0));
                    out.push((seg.0 + (seg.1 - seg.0) * t, tangent));
                    break;
                }
                acc += len;
                seg = segs.next().expect("peeked");
            }
        }
        out
    }
}

/// The superlevel boundary {u = t} of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelContour {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

impl LevelContour {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.polylines.iter().flat_map(|p| p.points.iter().copied())
    }

    pub fn distance_to(&self, x: Vec2) -> f64 {
        self.polylines.iter().map(|p| p.distance_to(x)).fold(f64::INFINITY, f64::min)
    }
}

/// Marching-squares contour of `field` at level `t` with linear edge
/// interpolation; {u > t} lies to the left of every polyline.
pub fn extract_contour(field: &ScalarField, t: f64) -> LevelContour {
    LevelContour {
        level: t,
        polylines: marching_squares(field.grid(), field.values(), t),
    }
}

pub(crate) fn marching_squares(grid: &Grid, values: &[f64], t: f64) -> Vec<Polyline> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h_edge = |i: usize, j: usize| 2 * (j * nx + i);
    let v_edge = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let crossing = |a: (usize, usize), b: (usize, usize)| {
        let va = values[grid.index(a.0, a.1)];
        let vb = values[grid.index(b.0, b.1)];
        let s = ((t - va) / (vb - va)).clamp(0.0, 1.0);
        let (pa, pb) = (grid.node(a.0, a.1), grid.node(b.0, b.1));
        pa + (pb - pa) * s
    };

    struct Seg {
        from: usize,
        to: usize,
        p_from: Vec2,
        p_to: Vec2,
    }
    let mut segs: Vec<Seg> = Vec::new();

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let inside: [bool; 4] = c.map(|(a, b)| values[grid.index(a, b)] > t);
            let case = inside.iter().enumerate().fold(0u8, |m, (k, &b)| m | ((b as u8) << k));
            if case == 0 || case == 15 {
                continue;
            }
            // edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c2-c3), 3 left (c3-c0)
            let edge_ids = [h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)];
            let edge_corners = [(0usize, 1usize), (1, 2), (2, 3), (3, 0)];
            let pairs: Vec<(usize, usize)> = match case {
                5 | 10 => {
                    let centre = c.iter().map(|&(a, b)| values[grid.index(a, b)]).sum::<f64>() / 4.0;
                    let joined = centre > t;
                    // case 5: c0, c2 inside; case 10: c1, c3 inside
                    if (case == 5) == joined {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => {
                    let crossed: Vec<usize> = (0..4)
                        .filter(|&e| inside[edge_corners[e].0] != inside[edge_corners[e].1])
                        .collect();
                    vec![(crossed[0], crossed[1])]
                }
            };
            for (ea, eb) in pairs {
                let point = |e: usize| {
                    let (ca, cb) = edge_corners[e];
                    crossing(c[ca], c[cb])
                };
                let (pa, pb) = (point(ea), point(eb));
                // corners passed going counterclockwise from ea to eb lie to the
                // right of ea -> eb, so that direction is correct iff they are outside
                let seg = if !inside[edge_corners[ea].1] {
                    Seg { from: edge_ids[ea], to: edge_ids[eb], p_from: pa, p_to: pb }
                } else {
                    Seg { from: edge_ids[eb], to: edge_ids[ea], p_from: pb, p_to: pa }
                };
                segs.push(seg);
            }
        }
    }

    let by_from: HashMap<usize, usize> = segs.iter().enumerate().map(|(k, s)| (s.from, k)).collect();
    let by_to: HashMap<usize, usize> = segs.iter().enumerate().map(|(k, s)| (s.to, k)).collect();
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        let mut head = start;
        while let Some(&prev) = by_to.get(&segs[head].from) {
            if prev == start || used[prev] {
                break;
            }
            head = prev;
        }
        let mut points = vec![segs[head].p_from];
        let mut cur = head;
        let mut closed = false;
        loop {
            used[cur] = true;
            match by_from.get(&segs[cur].to) {
                Some(&next) if next == head => {
                    closed = true;
                    break;
                }
                Some(&next) if !used[next] => {
                    points.push(segs[cur].p_to);
                    cur = next;
                }
                _ => {
                    points.push(segs[cur].p_to);
                    break;
                }
            }
        }
        out.push(Polyline { points, closed });
    }
    out
}

/// Symmetric Hausdorff distance between two polyline sets (vertex-to-curve).
pub fn hausdorff(a: &[Polyline], b: &[Polyline]) -> f64 {
    let directed = |from: &[Polyline], to: &[Polyline]| {
        from.iter()
            .flat_map(|p| p.points.iter())
            .map(|&x| to.iter().map(|q| q.distance_to(x)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
