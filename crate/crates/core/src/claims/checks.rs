use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::ClaimId;
use crate::error::{Error, Result};
use crate::fields::{extract_contour, hausdorff, DomainMask, Interpolation, Polyline, ScalarField};
use crate::freeboundary::overdetermined_residual;
use crate::geometry::{lipschitz_estimate, radial_decompose, ray_body_distance, ConvexBody, NormalRay, NormalSample, PairMetric};
use crate::thickness::{build_table, outer_extent, predicted_slope, thickness_derivative, ThicknessTable};
use crate::vec2::Vec2;

/// A field on a domain together with the convex body its rays start from.
#[derive(Debug, Clone)]
pub struct Case {
    pub field: ScalarField,
    pub mask: DomainMask,
    pub body: ConvexBody,
    pub max_u: f64,
    /// Nodes closer than this to the body are left out of derivative checks.
    pub exclusion: f64,
}

impl Case {
    /// `max_u` is taken over valid nodes of Ω; the exclusion defaults to four
    /// cells.
    pub fn new(field: ScalarField, mask: DomainMask, body: ConvexBody) -> Result<Self> {
        if field.grid() != mask.grid() {
            return Err(Error::InvalidGrid("field and mask live on different grids".into()));
        }
        let max_u = field
            .values()
            .iter()
            .zip(field.valid())
            .zip(mask.phi())
            .filter(|((_, &ok), &p)| ok && p <= 0.0)
            .fold(f64::NEG_INFINITY, |m, ((&v, _), _)| m.max(v));
        if !(max_u > 0.0) {
            return Err(Error::Precondition("field is not positive anywhere in the domain".into()));
        }
        let exclusion = 4.0 * field.grid().h;
        Ok(Case {
            field,
            mask,
            body,
            max_u,
            exclusion,
        })
    }

    pub fn with_exclusion(mut self, exclusion: f64) -> Self {
        self.exclusion = exclusion;
        self
    }

    pub fn h(&self) -> f64 {
        self.field.grid().h
    }
}

/// Sampling parameters shared by every check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub normal_samples: usize,
    /// Positive levels t (absolute values of u); t = 0 is always added.
    pub levels: Vec<f64>,
    /// Levels above this fraction of max u are dropped.
    pub max_level_fraction: f64,
    pub decomposition_points: usize,
    pub coverage_tol: f64,
    pub boundary_samples: usize,
    /// Distances r along each ray reported separately by the linearity check.
    pub ray_probes: Vec<f64>,
    pub ray_grid: usize,
    pub band_cells: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            normal_samples: 360,
            levels: vec![0.1, 0.2, 0.5],
            max_level_fraction: 0.9,
            decomposition_points: 1000,
            coverage_tol: 1e-6,
            boundary_samples: 360,
            ray_probes: vec![0.0, 0.1, 0.2, 0.5],
            ray_grid: 32,
            band_cells: 4.0,
        }
    }
}

/// Residual statistics at a single level t (or ray distance r).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResidual {
    /// `"t"` for levels of u, `"r"` for distances along the ray.
    pub kind: &'static str,
    pub at: f64,
    pub max: f64,
    pub mean: f64,
    /// Mean of the measured quantity where one is compared to a target.
    pub measured: Option<f64>,
}

/// One claim measured on one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub max: f64,
    pub mean: f64,
    /// Root mean square.
    pub l2: f64,
    pub per_level: Vec<LevelResidual>,
    pub details: Map<String, Value>,
}

impl Measurement {
    fn from_residuals(r: &[f64]) -> Self {
        let (max, mean, l2) = stats(r);
        Measurement {
            max,
            mean,
            l2,
            per_level: Vec::new(),
            details: Map::new(),
        }
    }

    pub fn level(&self, at: f64) -> Option<&LevelResidual> {
        self.per_level.iter().find(|l| (l.at - at).abs() <= 1e-12 * at.abs().max(1.0))
    }

    fn detail(mut self, key: &str, v: Value) -> Self {
        self.details.insert(key.to_string(), v);
        self
    }
}

/// (max, mean, rms) of the non-NaN entries; NaN when there are none.
fn stats(r: &[f64]) -> (f64, f64, f64) {
    let v: Vec<f64> = r.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / n;
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    (max, mean, rms)
}

fn level(kind: &'static str, at: f64, r: &[f64], measured: Option<f64>) -> LevelResidual {
    let (max, mean, _) = stats(r);
    LevelResidual {
        kind,
        at,
        max,
        mean,
        measured,
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// A case with its thickness table; derived data shared between checks.
pub(super) struct Prepared<'a> {
    case: &'a Case,
    config: &'a CheckConfig,
    /// Positive levels in use, ascending; column k + 1 of the table.
    levels: Vec<f64>,
    table: ThicknessTable,
    slopes: OnceLock<Vec<Vec<Option<(f64, f64)>>>>,
}

pub(super) fn prepare<'a>(case: &'a Case, config: &'a CheckConfig) -> Result<Prepared<'a>> {
    let cap = config.max_level_fraction * case.max_u;
    let mut levels: Vec<f64> = config.levels.iter().copied().filter(|&t| t > 0.0 && t <= cap).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let table = build_table(&case.field, &case.mask, &case.body, config.normal_samples, &levels)?;
    Ok(Prepared {
        case,
        config,
        levels,
        table,
        slopes: OnceLock::new(),
    })
}

impl Prepared<'_> {
    pub(super) fn table(&self) -> &ThicknessTable {
        &self.table
    }

    /// Levels including 0.
    fn all_levels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.table.levels.iter().copied().enumerate()
    }

    /// (measured, predicted) thickness slopes per positive level and row.
    fn slopes(&self) -> &Vec<Vec<Option<(f64, f64)>>> {
        self.slopes.get_or_init(|| {
            let c = self.case;
            self.levels
                .iter()
                .map(|&t| {
                    self.table
                        .rows
                        .par_iter()
                        .map(|row| {
                            let m = thickness_derivative(&c.field, &c.mask, &row.sample, t, None).ok()?;
                            let p = predicted_slope(&c.field, &c.mask, &row.sample, t).ok()?;
                            Some((m, p))
                        })
                        .collect()
                })
                .collect()
        })
    }
}

/// Measures one claim on one case.
pub fn run_check(id: ClaimId, case: &Case, config: &CheckConfig) -> Result<Measurement> {
    Ok(measure(id, &prepare(case, config)?))
}

pub(super) fn measure(id: ClaimId, p: &Prepared) -> Measurement {
    match id {
        ClaimId::RadialMonotonicity => radial_monotonicity(p),
        ClaimId::LevelParametrisation => level_parametrisation(p),
        ClaimId::DifferentialRelation => slope_check(p, |m, pr| (m - pr).abs()),
        ClaimId::ThicknessSlope => slope_check(p, |m, _| (m + 1.0).abs()),
        ClaimId::UniqueDecomposition => unique_decomposition(p),
        ClaimId::Subharmonicity => subharmonicity(p),
        ClaimId::Rigidity => rigidity(p),
        ClaimId::ParallelLevels => parallel_levels(p),
        ClaimId::RayLinearity => ray_linearity(p),
        ClaimId::Gnp => gnp(p),
    }
}

fn at(sample: &NormalSample, r: f64) -> Vec2 {
    sample.point + sample.normal * r
}

fn value(field: &ScalarField, x: Vec2) -> Option<f64> {
    field.sample(x, Interpolation::CatmullRom).ok().map(|s| s.value)
}

/// Largest rise u(r2) − u(r1), r1 < r2, along each ray over [0, d(c)].
fn radial_monotonicity(p: &Prepared) -> Measurement {
    let field = &p.case.field;
    let dr = 0.25 * p.case.h();
    let rises: Vec<Option<f64>> = p
        .table
        .rows
        .par_iter()
        .map(|row| {
            let d = row.extent();
            if !d.is_finite() {
                return None;
            }
            let n = (d / dr).ceil() as usize;
            let mut low = f64::INFINITY;
            let mut rise = 0.0f64;
            for k in 0..=n {
                let v = value(field, at(&row.sample, (k as f64 * dr).min(d)))?;
                rise = rise.max(v - low);
                low = low.min(v);
            }
            Some(rise)
        })
        .collect();
    let ok: Vec<f64> = rises.iter().flatten().copied().collect();
    let worst = rises
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Measurement::from_residuals(&ok)
        .detail("rays", json!(ok.len()))
        .detail("skipped", json!(rises.len() - ok.len()))
        .detail("worst_ray", json!(worst))
}

/// Hausdorff distance between the radial reconstruction of each level set
/// and the contour extracted from the field.
fn level_parametrisation(p: &Prepared) -> Measurement {
    let c = p.case;
    let mut per = Vec::new();
    let mut res = Vec::new();
    for (k, t) in p.all_levels() {
        let points: Vec<Vec2> = p
            .table
            .rows
            .iter()
            .filter(|r| r.entries[k].distance.is_finite())
            .map(|r| at(&r.sample, r.entries[k].distance))
            .collect();
        let contour = if k == 0 {
            c.mask.boundary()
        } else {
            extract_contour(&c.field, t).polylines
        };
        let dist = if points.len() < 2 || contour.is_empty() {
            f64::NAN
        } else {
            hausdorff(&[Polyline { points, closed: true }], &contour)
        };
        res.push(dist);
        per.push(level("t", t, &[dist], None));
    }
    let mut m = Measurement::from_residuals(&res);
    m.per_level = per;
    m.detail("h", json!(c.h()))
}

fn slope_check(p: &Prepared, residual: impl Fn(f64, f64) -> f64) -> Measurement {
    let slopes = p.slopes();
    let mut all = Vec::new();
    let mut per = Vec::new();
    let mut failed = 0usize;
    for (&t, col) in p.levels.iter().zip(slopes) {
        let r: Vec<f64> = col.iter().flatten().map(|&(m, pr)| residual(m, pr)).collect();
        failed += col.len() - r.len();
        let measured = mean(col.iter().flatten().map(|&(m, _)| m));
        per.push(level("t", t, &r, Some(measured)));
        all.extend(r);
    }
    let mut m = Measurement::from_residuals(&all);
    m.per_level = per;
    m.detail("failed_samples", json!(failed))
}

/// Points of ∂Ω spread by arc length with their outward normals.
fn boundary_samples(mask: &DomainMask, n: usize) -> Vec<(Vec2, Vec2)> {
    let lines = mask.boundary();
    let total: f64 = lines.iter().map(Polyline::length).sum();
    if !(total > 0.0) {
        return Vec::new();
    }
    lines
        .iter()
        .flat_map(|l| {
            let k = ((n as f64 * l.length() / total).round() as usize).max(1);
            l.resample(k)
        })
        .filter_map(|(x, _)| mask.normal_at(x).ok().map(|nu| (x, nu)))
        .collect()
}

/// Radical inverse of `k` in `base`.
fn halton(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

/// Quasi-random points of Ω∖C (Halton, bases 2 and 3, over the box of ∂Ω).
fn interior_points(mask: &DomainMask, body: &ConvexBody, n: usize) -> Vec<Vec2> {
    let pts: Vec<Vec2> = mask.boundary().iter().flat_map(|l| l.points.clone()).collect();
    if pts.is_empty() {
        return Vec::new();
    }
    let lo = pts.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, p| Vec2::new(a.x.min(p.x), a.y.min(p.y)));
    let hi = pts.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| Vec2::new(a.x.max(p.x), a.y.max(p.y)));
    let mut out = Vec::with_capacity(n);
    let mut k = 1;
    while out.len() < n && k <= 100 * n {
        let x = Vec2::new(lo.x + (hi.x - lo.x) * halton(k, 2), lo.y + (hi.y - lo.y) * halton(k, 3));
        if mask.phi_at(x).map_or(false, |v| v < 0.0) && body.signed_distance(x) > 0.0 {
            out.push(x);
        }
        k += 1;
    }
    out
}

fn foot_sample(foot: Vec2, normal: Vec2) -> NormalSample {
    NormalSample {
        point: foot,
        normal,
        arc_index: 0,
    }
}

/// Round trip of the radial decomposition plus the fraction of points whose
/// radius is not below the ray's exit distance d(c).
fn unique_decomposition(p: &Prepared) -> Measurement {
    let c = p.case;
    let points = interior_points(&c.mask, &c.body, p.config.decomposition_points);
    let tol = p.config.coverage_tol;
    let per_point: Vec<(f64, bool)> = points
        .par_iter()
        .map(|&x| match radial_decompose(x, &c.body) {
            Ok(dec) => {
                let trip = dec.reconstruct().distance(x);
                let covered = outer_extent(&c.mask, &foot_sample(dec.foot, dec.normal)).map_or(false, |d| dec.radius < d + tol);
                (trip, !covered)
            }
            Err(_) => (f64::INFINITY, true),
        })
        .collect();
    let trips: Vec<f64> = per_point.iter().map(|t| t.0).collect();
    let failures = per_point.iter().filter(|t| t.1).count();
    let fraction = if points.is_empty() { f64::NAN } else { failures as f64 / points.len() as f64 };
    let consistency: Vec<f64> = boundary_samples(&c.mask, p.config.boundary_samples)
        .par_iter()
        .filter_map(|&(x, _)| {
            let dec = radial_decompose(x, &c.body).ok()?;
            let d = outer_extent(&c.mask, &foot_sample(dec.foot, dec.normal)).ok()?;
            Some((dec.radius - d).abs())
        })
        .collect();
    let (trip_max, trip_mean, trip_rms) = stats(&trips);
    Measurement {
        max: trip_max.max(fraction),
        mean: trip_mean,
        l2: trip_rms,
        per_level: Vec::new(),
        details: Map::new(),
    }
    .detail("points", json!(points.len()))
    .detail("round_trip_max", json!(trip_max))
    .detail("coverage_failures", json!(failures))
    .detail("coverage_failure_fraction", json!(fraction))
    .detail("boundary_consistency_max", json!(stats(&consistency).0))
}

/// max(0, −Δw) for w = |∇u|² at nodes away from ∂Ω and C.
fn subharmonicity(p: &Prepared) -> Measurement {
    let c = p.case;
    let g = *c.field.grid();
    let band = p.config.band_cells * g.h;
    let w = c.field.grad_norm_sq();
    let phi = c.mask.phi();
    let lap: Vec<f64> = (0..g.len())
        .into_par_iter()
        .filter_map(|k| {
            let x = g.node_at(k);
            if !w.valid()[k] || phi[k] > -band || c.body.signed_distance(x) < c.exclusion {
                return None;
            }
            let l = w.laplacian(x).ok()?;
            (!l.one_sided).then_some(l.value)
        })
        .collect();
    let res: Vec<f64> = lap.iter().map(|l| (-l).max(0.0)).collect();
    Measurement::from_residuals(&res)
        .detail("nodes", json!(lap.len()))
        .detail("min_laplacian", json!(lap.iter().copied().fold(f64::INFINITY, f64::min)))
}

/// ||∇u| − 1| on ∂Ω (t = 0) and at the level points c + d_t ν.
fn rigidity(p: &Prepared) -> Measurement {
    let c = p.case;
    let mut all = Vec::new();
    let mut per = Vec::new();
    let mut m = Map::new();
    for (k, t) in p.all_levels() {
        let (r, measured): (Vec<f64>, Option<f64>) = if k == 0 {
            match overdetermined_residual(&c.field, &c.mask, p.config.boundary_samples) {
                Ok(s) => {
                    m.insert("boundary_flagged".into(), json!(s.flagged));
                    (s.residuals.iter().map(|r| r.abs()).collect(), None)
                }
                Err(e) => {
                    m.insert("boundary_error".into(), json!(e.to_string()));
                    (Vec::new(), None)
                }
            }
        } else {
            let norms: Vec<f64> = p
                .table
                .rows
                .iter()
                .filter(|r| r.entries[k].distance.is_finite())
                .filter_map(|r| c.field.gradient(at(&r.sample, r.entries[k].distance)).ok())
                .map(|g| g.value.norm())
                .collect();
            (norms.iter().map(|g| (g - 1.0).abs()).collect(), Some(mean(norms.iter().copied())))
        };
        per.push(level("t", t, &r, measured));
        all.extend(r);
    }
    let mut out = Measurement::from_residuals(&all);
    out.per_level = per;
    out.details = m;
    out
}

/// |d_t(c) − (d(c) − t)|.
fn parallel_levels(p: &Prepared) -> Measurement {
    let mut all = Vec::new();
    let mut per = Vec::new();
    for (k, t) in p.all_levels() {
        let r: Vec<f64> = p
            .table
            .rows
            .iter()
            .map(|row| (row.entries[k].distance - (row.extent() - t)).abs())
            .filter(|x| x.is_finite())
            .collect();
        per.push(level("t", t, &r, Some(mean(p.table.rows.iter().map(|row| row.entries[k].distance).filter(|d| d.is_finite())))));
        all.extend(r);
    }
    let mut m = Measurement::from_residuals(&all);
    m.per_level = per;
    m
}

/// |u(c + rν) − (d(c) − r)| on a uniform grid of r ∈ [0, d(c)] and at the
/// probe distances.
fn ray_linearity(p: &Prepared) -> Measurement {
    let c = p.case;
    let probes = &p.config.ray_probes;
    let n = p.config.ray_grid.max(1);
    let per_row: Vec<Option<(Vec<f64>, Vec<Option<f64>>)>> = p
        .table
        .rows
        .par_iter()
        .map(|row| {
            let d = row.extent();
            if !d.is_finite() {
                return None;
            }
            let res = |r: f64| value(&c.field, at(&row.sample, r)).map(|u| (u - (d - r)).abs());
            let grid: Vec<f64> = (0..=n).filter_map(|k| res(d * k as f64 / n as f64)).collect();
            let at_probe: Vec<Option<f64>> = probes.iter().map(|&r| if r <= d { res(r) } else { None }).collect();
            Some((grid, at_probe))
        })
        .collect();
    let mut all = Vec::new();
    for (g, pr) in per_row.iter().flatten() {
        all.extend(g);
        all.extend(pr.iter().flatten());
    }
    let per = probes
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let v: Vec<f64> = per_row.iter().flatten().filter_map(|(_, pr)| pr[i]).collect();
            level("r", r, &v, None)
        })
        .collect();
    let mut m = Measurement::from_residuals(&all);
    m.per_level = per;
    m
}

/// Distance between C and the inward normal ray of ∂Ω at `point`, where
/// `outward_normal` is the outer unit normal of Ω there.
pub fn gnp_ray_distance(point: Vec2, outward_normal: Vec2, body: &ConvexBody) -> Result<f64> {
    Ok(ray_body_distance(&NormalRay::new(point, -outward_normal)?, body))
}

/// Four conditions: C inside Ω, d Lipschitz on ∂C, inward normals of ∂Ω
/// meeting C, and each normal ray of C leaving Ω once.
fn gnp(p: &Prepared) -> Measurement {
    let c = p.case;
    let rows = &p.table.rows;
    let p1 = rows
        .iter()
        .map(|r| c.mask.phi_at(r.sample.point).map_or(f64::INFINITY, |v| v.max(0.0)))
        .fold(0.0, f64::max);

    let scale = c.body.perimeter();
    let mut unique: Vec<(Vec2, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.extent().is_finite()) {
        if unique.last().map_or(true, |u| u.0.distance(r.sample.point) > 1e-12 * scale) {
            unique.push((r.sample.point, r.extent()));
        }
    }
    if unique.len() > 2 && unique[0].0.distance(unique[unique.len() - 1].0) <= 1e-12 * scale {
        unique.pop();
    }
    let lip = lipschitz_estimate(&unique, PairMetric::Chordal).ok();
    let p2_finite = lip.map_or(false, |l| !l.infinite);
    let p2 = if p2_finite { 0.0 } else { 1.0 };

    let p3: Vec<f64> = boundary_samples(&c.mask, p.config.boundary_samples)
        .iter()
        .filter_map(|&(x, nu)| gnp_ray_distance(x, nu, &c.body).ok())
        .collect();
    let (p3_max, p3_mean, p3_rms) = stats(&p3);

    let broken = rows
        .iter()
        .filter(|r| !r.extent().is_finite() || r.entries[0].extra_crossings > 0)
        .count();
    let p4 = broken as f64 / rows.len().max(1) as f64;

    Measurement {
        max: p1.max(p2).max(p3_max).max(p4),
        mean: p3_mean,
        l2: p3_rms,
        per_level: Vec::new(),
        details: Map::new(),
    }
    .detail("p1_inclusion", json!(p1))
    .detail("p2_lipschitz_finite", json!(p2_finite))
    .detail("p2_lipschitz_constant", json!(lip.map(|l| l.constant)))
    .detail("p3_max", json!(p3_max))
    .detail("p3_samples", json!(p3.len()))
    .detail("p4_broken_fraction", json!(p4))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_sequence() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn stats_skip_nan() {
        assert_eq!(stats(&[3.0, f64::NAN, 4.0]), (4.0, 3.5, (12.5f64).sqrt()));
        assert!(stats(&[]).0.is_nan());
    }
}
