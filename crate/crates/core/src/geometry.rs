//! Convex bodies in the plane, their outer normals, and the metric
//! projection used to decompose points outside a body into a boundary foot
//! plus a distance along the outer normal.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Angular step of the discretized normal fan at a polygon vertex.
pub const MAX_FAN_STEP: f64 = PI / 180.0;

/// A compact convex set: a disk or a strictly convex polygon.
///
/// Polygon vertices are stored counterclockwise regardless of the input
/// orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBody", into = "RawBody")]
pub enum ConvexBody {
    Disk { center: Vec2, radius: f64 },
    Polygon { vertices: Vec<Vec2> },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawBody {
    Disk { center: Vec2, radius: f64 },
    Polygon { vertices: Vec<Vec2> },
}

impl TryFrom<RawBody> for ConvexBody {
    type Error = Error;

    fn try_from(raw: RawBody) -> Result<Self> {
        match raw {
            RawBody::Disk { center, radius } => ConvexBody::disk(center, radius),
            RawBody::Polygon { vertices } => ConvexBody::polygon(vertices),
        }
    }
}

impl From<ConvexBody> for RawBody {
    fn from(b: ConvexBody) -> Self {
        match b {
            ConvexBody::Disk { center, radius } => RawBody::Disk { center, radius },
            ConvexBody::Polygon { vertices } => RawBody::Polygon { vertices },
        }
    }
}

/// A point of the body boundary together with one outer unit normal there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSample {
    pub point: Vec2,
    pub normal: Vec2,
    pub arc_index: usize,
}

/// A half-line `origin + s * direction`, `s >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalRay {
    pub origin: Vec2,
    pub direction: Vec2,
}

impl NormalRay {
    pub fn new(origin: Vec2, direction: Vec2) -> Result<Self> {
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("ray direction must be nonzero".into()))?;
        Ok(NormalRay { origin, direction })
    }

    pub fn at(&self, s: f64) -> Vec2 {
        self.origin + self.direction * s
    }
}

impl From<NormalSample> for NormalRay {
    fn from(s: NormalSample) -> Self {
        NormalRay {
            origin: s.point,
            direction: s.normal,
        }
    }
}

/// `x = foot + radius * normal` with `foot` the nearest point of the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDecomposition {
    pub foot: Vec2,
    pub radius: f64,
    pub normal: Vec2,
}

impl RadialDecomposition {
    pub fn reconstruct(&self) -> Vec2 {
        self.foot + self.normal * self.radius
    }
}

impl ConvexBody {
    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidBody(format!("disk radius must be positive, got {radius}")));
        }
        Ok(ConvexBody::Disk { center, radius })
    }

    pub fn polygon(mut vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidBody(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBody("non-finite polygon vertex".into()));
        }
        let turns: Vec<f64> = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let c = vertices[(i + 2) % n];
                (b - a).cross(c - b)
            })
            .collect();
        let scale = vertices
            .iter()
            .map(|v| v.distance(vertices[0]))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale * scale;
        let ccw = turns.iter().all(|&t| t > tol);
        let cw = turns.iter().all(|&t| t < -tol);
        if !(ccw || cw) {
            return Err(Error::InvalidBody(
                "polygon is not strictly convex (collinear or reflex vertices)".into(),
            ));
        }
        if cw {
            vertices.reverse();
        }
        // a strictly convex closed polygon turns by exactly 2π; more means self-intersection
        let total_turn: f64 = (0..n)
            .map(|i| {
                let e0 = vertices[(i + 1) % n] - vertices[i];
                let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (total_turn - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::InvalidBody("polygon winds more than once".into()));
        }
        Ok(ConvexBody::Polygon { vertices })
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            ConvexBody::Disk { radius, .. } => 2.0 * PI * radius,
            ConvexBody::Polygon { vertices } => edges(vertices).map(|(a, b)| a.distance(b)).sum(),
        }
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            ConvexBody::Disk { center, radius } => (
                *center - Vec2::new(*radius, *radius),
                *center + Vec2::new(*radius, *radius),
            ),
            ConvexBody::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance: negative inside, zero on the boundary.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        match self {
            ConvexBody::Disk { center, radius } => x.distance(*center) - radius,
            ConvexBody::Polygon { vertices } => {
                let d = edges(vertices)
                    .map(|(a, b)| segment_distance(x, a, b))
                    .fold(f64::INFINITY, f64::min);
                if polygon_contains(vertices, x) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.signed_distance(x) <= 0.0
    }

    /// Nearest point of the body (the point itself when inside).
    pub fn project(&self, x: Vec2) -> Vec2 {
        match self {
            ConvexBody::Disk { center, radius } => {
                let r = x - *center;
                let d = r.norm();
                if d <= *radius {
                    x
                } else {
                    *center + r * (radius / d)
                }
            }
            ConvexBody::Polygon { vertices } => {
                if polygon_contains(vertices, x) {
                    return x;
                }
                let mut best = vertices[0];
                let mut best_d = f64::INFINITY;
                for (a, b) in edges(vertices) {
                    let p = segment_closest(x, a, b);
                    let d = p.distance(x);
                    if d < best_d {
                        best_d = d;
                        best = p;
                    }
                }
                best
            }
        }
    }

    /// One outer unit normal at a boundary point. At a polygon vertex this is
    /// the bisector of the normal fan.
    pub fn outer_normal_at(&self, x: Vec2) -> Vec2 {
        match self {
            ConvexBody::Disk { center, .. } => (x - *center).normalized().unwrap_or(Vec2::new(1.0, 0.0)),
            ConvexBody::Polygon { vertices } => {
                let n = vertices.len();
                let scale = self.perimeter();
                for (i, v) in vertices.iter().enumerate() {
                    if v.distance(x) <= 1e-12 * scale {
                        let prev = edge_normal(vertices[(i + n - 1) % n], *v);
                        let next = edge_normal(*v, vertices[(i + 1) % n]);
                        return (prev + next).normalized().unwrap_or(next);
                    }
                }
                let (mut best_i, mut best_d) = (0, f64::INFINITY);
                for (i, (a, b)) in edges(vertices).enumerate() {
                    let d = segment_distance(x, a, b);
                    if d < best_d {
                        best_d = d;
                        best_i = i;
                    }
                }
                edge_normal(vertices[best_i], vertices[(best_i + 1) % n])
            }
        }
    }

    /// Points of the boundary with outer unit normals, ordered counterclockwise.
    ///
    /// Disks are sampled at `n_samples` equally spaced angles starting at
    /// angle zero. Polygons are sampled along each edge with spacing at most
    /// `perimeter / n_samples`; at every vertex the normal cone is expanded
    /// into a fan from the incoming to the outgoing edge normal with angular
    /// step at most `min(1°, 2π / n_samples)`.
    pub fn sample_outer_normals(&self, n_samples: usize) -> Result<Vec<NormalSample>> {
        if n_samples < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 normal samples, got {n_samples}"
            )));
        }
        let mut out = Vec::with_capacity(n_samples + 8);
        match self {
            ConvexBody::Disk { center, radius } => {
                for k in 0..n_samples {
                    let normal = cardinal_snap(Vec2::from_angle(2.0 * PI * k as f64 / n_samples as f64));
                    out.push(NormalSample {
                        point: *center + normal * *radius,
                        normal,
                        arc_index: k,
                    });
                }
            }
            ConvexBody::Polygon { vertices } => {
                let n = vertices.len();
                let spacing = self.perimeter() / n_samples as f64;
                let fan_step = MAX_FAN_STEP.min(2.0 * PI / n_samples as f64);
                for i in 0..n {
                    let v = vertices[i];
                    let next = vertices[(i + 1) % n];
                    let n_in = edge_normal(vertices[(i + n - 1) % n], v);
                    let n_out = edge_normal(v, next);
                    let a0 = n_in.angle();
                    let mut sweep = n_out.angle() - a0;
                    while sweep <= 0.0 {
                        sweep += 2.0 * PI;
                    }
                    let steps = (sweep / fan_step).ceil().max(1.0) as usize;
                    for k in 0..=steps {
                        let normal = cardinal_snap(Vec2::from_angle(a0 + sweep * k as f64 / steps as f64));
                        out.push(NormalSample {
                            point: v,
                            normal,
                            arc_index: out.len(),
                        });
                    }
                    let len = v.distance(next);
                    let pieces = (len / spacing).ceil().max(1.0) as usize;
                    for k in 1..pieces {
                        out.push(NormalSample {
                            point: v + (next - v) * (k as f64 / pieces as f64),
                            normal: n_out,
                            arc_index: out.len(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Writes `x` as foot + radius * normal with the foot the metric projection
/// onto `body`.
pub fn radial_decompose(x: Vec2, body: &ConvexBody) -> Result<RadialDecomposition> {
    let sd = body.signed_distance(x);
    let scale = body.perimeter();
    if sd < -1e-12 * scale {
        return Err(Error::InsideBody(x.x, x.y));
    }
    let foot = body.project(x);
    let radius = x.distance(foot);
    let normal = if radius > 1e-14 * scale {
        (x - foot) / radius
    } else {
        body.outer_normal_at(x)
    };
    let radius = if radius > 1e-14 * scale { radius } else { 0.0 };
    Ok(RadialDecomposition { foot, radius, normal })
}

/// Distance between a closed ray and the body; zero iff they meet.
pub fn ray_body_distance(ray: &NormalRay, body: &ConvexBody) -> f64 {
    match body {
        ConvexBody::Disk { center, radius } => {
            let s = (*center - ray.origin).dot(ray.direction).max(0.0);
            (ray.at(s).distance(*center) - radius).max(0.0)
        }
        ConvexBody::Polygon { vertices } => {
            if ray_hits_polygon(ray, vertices) {
                return 0.0;
            }
            edges(vertices)
                .map(|(a, b)| {
                    segment_distance(ray.origin, a, b)
                        .min(point_ray_distance(a, ray))
                        .min(point_ray_distance(b, ray))
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMetric {
    Chordal,
    /// Arc length along the closed polyline through the samples in order.
    Geodesic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// `f64::INFINITY` when `infinite` is set.
    pub constant: f64,
    pub metric: PairMetric,
    pub infinite: bool,
}

/// Largest difference quotient over all sample pairs.
pub fn lipschitz_estimate(samples: &[(Vec2, f64)], metric: PairMetric) -> Result<LipschitzEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "Lipschitz estimate needs at least two samples".into(),
        ));
    }
    let arc: Vec<f64> = match metric {
        PairMetric::Chordal => Vec::new(),
        PairMetric::Geodesic => {
            let mut s = Vec::with_capacity(samples.len() + 1);
            s.push(0.0);
            for w in samples.windows(2) {
                let last = *s.last().unwrap();
                s.push(last + w[0].0.distance(w[1].0));
            }
            s
        }
    };
    let total = match metric {
        PairMetric::Chordal => 0.0,
        PairMetric::Geodesic => arc[samples.len() - 1] + samples[samples.len() - 1].0.distance(samples[0].0),
    };
    let mut constant = 0.0f64;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let dv = (samples[i].1 - samples[j].1).abs();
            let dist = match metric {
                PairMetric::Chordal => samples[i].0.distance(samples[j].0),
                PairMetric::Geodesic => {
                    let ds = (arc[j] - arc[i]).abs();
                    ds.min(total - ds)
                }
            };
            if dist <= 0.0 {
                if dv > 0.0 {
                    return Ok(LipschitzEstimate {
                        constant: f64::INFINITY,
                        metric,
                        infinite: true,
                    });
                }
                continue;
            }
            constant = constant.max(dv / dist);
        }
    }
    Ok(LipschitzEstimate {
        constant,
        metric,
        infinite: false,
    })
}

pub(crate) fn edges(vertices: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

/// Outward normal of a counterclockwise edge.
fn edge_normal(a: Vec2, b: Vec2) -> Vec2 {
    let e = b - a;
    Vec2::new(e.y, -e.x).normalized().expect("nondegenerate edge")
}

fn polygon_contains(vertices: &[Vec2], x: Vec2) -> bool {
    edges(vertices).all(|(a, b)| (b - a).cross(x - a) >= 0.0)
}

fn segment_closest(x: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let e = b - a;
    let t = ((x - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
    a + e * t
}

fn segment_distance(x: Vec2, a: Vec2, b: Vec2) -> f64 {
    segment_closest(x, a, b).distance(x)
}

fn point_ray_distance(p: Vec2, ray: &NormalRay) -> f64 {
    let s = (p - ray.origin).dot(ray.direction).max(0.0);
    ray.at(s).distance(p)
}

fn ray_hits_polygon(ray: &NormalRay, vertices: &[Vec2]) -> bool {
    // clip s ∈ [0, ∞) against every supporting half-plane
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (a, b) in edges(vertices) {
        let n = edge_normal(a, b);
        let slack = n.dot(a) - n.dot(ray.origin);
        let rate = n.dot(ray.direction);
        if rate.abs() < 1e-15 {
            if slack < 0.0 {
                return false;
            }
        } else if rate > 0.0 {
            hi = hi.min(slack / rate);
        } else {
            lo = lo.max(slack / rate);
        }
        if lo > hi {
            return false;
        }
    }
    true
}

/// Removes rounding noise from exact cardinal directions.
fn cardinal_snap(v: Vec2) -> Vec2 {
    let snap = |c: f64| if c.abs() < 1e-15 { 0.0 } else { c };
    Vec2::new(snap(v.x), snap(v.y))
}
