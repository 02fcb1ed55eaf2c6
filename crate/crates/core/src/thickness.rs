//! Thickness of the level sets of u measured along outer normal rays of C.
//!
//! For c ∈ ∂C with outer normal ν(c), the profile is φ_c(r) = u(c + rν(c)),
//! d(c) is the distance along the ray to ∂Ω and d_t(c) the distance to the
//! level set {u = t}.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DomainMask, Interpolation, ScalarField};
use crate::geometry::{ConvexBody, NormalSample};
use crate::io::fmt9;
use crate::vec2::Vec2;

/// Bisection stops when the bracket is narrower than this many cells.
const BISECTION_CELLS: f64 = 1e-9;
/// Relative increase along a ray tolerated before a profile counts as
/// non-monotone (interpolation noise).
const MONOTONE_SLACK: f64 = 1e-9;

/// u sampled along one normal ray, from c out to the first sign change.
#[derive(Debug, Clone, PartialEq)]
pub struct RayProfile {
    pub sample: NormalSample,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RayProfile {
    /// Largest increase between consecutive samples (0 for a
    /// non-increasing profile).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Where a ray leaves a region, with the number of times it re-enters
/// afterwards before leaving the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub distance: f64,
    pub extra_crossings: usize,
    /// The values on the bracket walk before the crossing were monotone.
    pub monotone: bool,
}

fn value(field: &ScalarField, x: Vec2) -> Result<f64> {
    Ok(field.sample(x, Interpolation::CatmullRom)?.value)
}

fn point(sample: &NormalSample, r: f64) -> Vec2 {
    sample.point + sample.normal * r
}

fn unbounded(sample: &NormalSample) -> Error {
    Error::UnboundedRay(sample.point.x, sample.point.y)
}

pub fn ray_profile(field: &ScalarField, sample: &NormalSample, dr: f64) -> Result<RayProfile> {
    let h = field.grid().h;
    if !(dr > 0.0 && dr <= h) {
        return Err(Error::InvalidParameter(format!("ray step must be in (0, h], got {dr}")));
    }
    let start = value(field, sample.point).map_err(|_| unbounded(sample))?;
    if !(start > 0.0) {
        return Err(Error::Precondition(format!(
            "ray origin ({}, {}) is not inside the domain (u = {start})",
            sample.point.x, sample.point.y
        )));
    }
    let mut radii = vec![0.0];
    let mut values = vec![start];
    let mut k = 1usize;
    loop {
        let r = k as f64 * dr;
        let v = value(field, point(sample, r)).map_err(|_| unbounded(sample))?;
        radii.push(r);
        values.push(v);
        if v <= 0.0 {
            break;
        }
        k += 1;
    }
    Ok(RayProfile {
        sample: *sample,
        radii,
        values,
    })
}

/// First r > 0 where `f(r) <= 0`, bracketed at step `dr` then bisected to
/// `tol`. Also counts later re-entries (f > 0 again) until `f` fails.
fn first_root(
    f: impl Fn(f64) -> Option<f64>,
    f0: f64,
    dr: f64,
    tol: f64,
    sample: &NormalSample,
) -> Result<Crossing> {
    let mut prev = (0.0, f0);
    let mut monotone = true;
    let mut k = 1usize;
    let (lo, hi) = loop {
        let r = k as f64 * dr;
        let v = f(r).ok_or_else(|| unbounded(sample))?;
        if v > prev.1 + MONOTONE_SLACK * prev.1.abs().max(1.0) {
            monotone = false;
        }
        if v <= 0.0 {
            break ((prev.0, prev.1), (r, v));
        }
        prev = (r, v);
        k += 1;
    };
    let (mut a, mut b) = (lo.0, hi.0);
    while b - a > tol {
        let m = 0.5 * (a + b);
        match f(m) {
            Some(v) if v > 0.0 => a = m,
            Some(_) => b = m,
            None => break,
        }
    }
    let distance = 0.5 * (a + b);
    let mut extra = 0;
    let mut inside = false;
    let mut r = hi.0 + dr;
    while let Some(v) = f(r) {
        if v > 0.0 && !inside {
            extra += 1;
        }
        inside = v > 0.0;
        r += dr;
    }
    Ok(Crossing {
        distance,
        extra_crossings: extra,
        monotone,
    })
}

/// d(c): distance along the ray to the zero level of φ_Ω, with re-entries
/// into Ω counted.
pub fn outer_extent_detail(mask: &DomainMask, sample: &NormalSample) -> Result<Crossing> {
    let h = mask.grid().h;
    let phi0 = mask.phi_at(sample.point).map_err(|_| unbounded(sample))?;
    if !(phi0 < 0.0) {
        return Err(Error::Precondition(format!(
            "ray origin ({}, {}) is not inside the domain",
            sample.point.x, sample.point.y
        )));
    }
    first_root(
        |r| mask.phi_at(point(sample, r)).ok().map(|v| -v),
        -phi0,
        0.5 * h,
        BISECTION_CELLS * h,
        sample,
    )
}

pub fn outer_extent(mask: &DomainMask, sample: &NormalSample) -> Result<f64> {
    Ok(outer_extent_detail(mask, sample)?.distance)
}

/// d_t(c) with its crossing diagnostics. t = 0 is the outer extent.
pub fn level_thickness_detail(field: &ScalarField, mask: &DomainMask, sample: &NormalSample, t: f64) -> Result<Crossing> {
    let start = value(field, sample.point).map_err(|_| unbounded(sample))?;
    if !(t >= 0.0 && t < start) {
        return Err(Error::LevelAboveRay { level: t, start });
    }
    if t == 0.0 {
        return outer_extent_detail(mask, sample);
    }
    let h = field.grid().h;
    // Outside Ω, u is taken to be 0; the scan ends where the grid ends.
    first_root(
        |r| {
            let x = point(sample, r);
            match mask.phi_at(x) {
                Ok(p) if p <= 0.0 => value(field, x).ok().map(|v| v - t),
                Ok(_) => Some(-t),
                Err(_) => None,
            }
        },
        start - t,
        0.5 * h,
        BISECTION_CELLS * h,
        sample,
    )
}

pub fn level_thickness(field: &ScalarField, mask: &DomainMask, sample: &NormalSample, t: f64) -> Result<f64> {
    Ok(level_thickness_detail(field, mask, sample, t)?.distance)
}

/// ∂d_t/∂t by central differences at steps dt and dt/2 combined by
/// Richardson extrapolation. `dt` defaults to 1e-3·max u.
pub fn thickness_derivative(
    field: &ScalarField,
    mask: &DomainMask,
    sample: &NormalSample,
    t: f64,
    dt: Option<f64>,
) -> Result<f64> {
    let dt = match dt {
        Some(d) => d,
        None => 1e-3 * field.max_value().map(|m| m.0).unwrap_or(0.0),
    };
    let start = value(field, sample.point)?;
    if !(dt > 0.0 && t - dt > 0.0 && t + dt < start) {
        return Err(Error::InvalidParameter(format!(
            "levels t ± dt = {t} ± {dt} must lie in (0, {start})"
        )));
    }
    let central = |d: f64| -> Result<f64> {
        let up = level_thickness(field, mask, sample, t + d)?;
        let down = level_thickness(field, mask, sample, t - d)?;
        Ok((up - down) / (2.0 * d))
    };
    let coarse = central(dt)?;
    let fine = central(0.5 * dt)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// −1/|∇u| at the point where the ray meets {u = t}.
pub fn predicted_slope(field: &ScalarField, mask: &DomainMask, sample: &NormalSample, t: f64) -> Result<f64> {
    let d = level_thickness(field, mask, sample, t)?;
    let g = field.gradient(point(sample, d))?.value.norm();
    if !(g > 0.0) {
        return Err(Error::InvalidParameter("gradient vanishes on the level set".into()));
    }
    Ok(-1.0 / g)
}

/// Per-entry outcome in a thickness table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryFlag {
    Ok,
    /// The profile increased somewhere before the crossing.
    NonMonotone,
    /// The ray re-crossed the level after the first crossing.
    ExtraCrossings,
    LevelAboveRay,
    UnboundedRay,
    Failed,
}

impl EntryFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryFlag::Ok => "ok",
            EntryFlag::NonMonotone => "non-monotone",
            EntryFlag::ExtraCrossings => "extra-crossings",
            EntryFlag::LevelAboveRay => "level-above-ray",
            EntryFlag::UnboundedRay => "unbounded-ray",
            EntryFlag::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessEntry {
    pub level: f64,
    /// NaN when the entry could not be computed.
    pub distance: f64,
    pub extra_crossings: usize,
    pub flag: EntryFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessRow {
    pub sample: NormalSample,
    pub entries: Vec<ThicknessEntry>,
}

impl ThicknessRow {
    /// d(c), the t = 0 entry.
    pub fn extent(&self) -> f64 {
        self.entries[0].distance
    }

    /// Entries strictly decrease as the level increases.
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].distance < w[0].distance)
    }
}

/// d_t(c) over normal samples of ∂C (rows) and levels (columns); the first
/// level is always 0, so the first column is d(c).
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessTable {
    pub levels: Vec<f64>,
    pub rows: Vec<ThicknessRow>,
}

impl ThicknessTable {
    pub fn column(&self, level_index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.entries[level_index].distance).collect()
    }

    pub fn monotone_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_monotone()).count()
    }

    pub fn flagged_entries(&self) -> usize {
        self.rows.iter().flat_map(|r| &r.entries).filter(|e| e.flag != EntryFlag::Ok).count()
    }

    /// One line per (sample, level):
    /// `c_index,cx,cy,nux,nuy,t,d_t,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c_index,cx,cy,nux,nuy,t,d_t,flag\n");
        for (i, row) in self.rows.iter().enumerate() {
            let s = &row.sample;
            for e in &row.entries {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    i,
                    fmt9(s.point.x),
                    fmt9(s.point.y),
                    fmt9(s.normal.x),
                    fmt9(s.normal.y),
                    fmt9(e.level),
                    fmt9(e.distance),
                    e.flag.as_str()
                );
            }
        }
        out
    }
}

fn entry(field: &ScalarField, mask: &DomainMask, sample: &NormalSample, t: f64) -> ThicknessEntry {
    match level_thickness_detail(field, mask, sample, t) {
        Ok(c) => ThicknessEntry {
            level: t,
            distance: c.distance,
            extra_crossings: c.extra_crossings,
            flag: if !c.monotone {
                EntryFlag::NonMonotone
            } else if c.extra_crossings > 0 {
                EntryFlag::ExtraCrossings
            } else {
                EntryFlag::Ok
            },
        },
        Err(e) => ThicknessEntry {
            level: t,
            distance: f64::NAN,
            extra_crossings: 0,
            flag: match e {
                Error::LevelAboveRay { .. } => EntryFlag::LevelAboveRay,
                Error::UnboundedRay(..) => EntryFlag::UnboundedRay,
                _ => EntryFlag::Failed,
            },
        },
    }
}

/// Thickness over `n_c` outer normal samples of `body` and the given levels
/// (0 is always included as the first column; the rest are sorted).
pub fn build_table(
    field: &ScalarField,
    mask: &DomainMask,
    body: &ConvexBody,
    n_c: usize,
    levels: &[f64],
) -> Result<ThicknessTable> {
    if levels.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("levels must be finite and nonnegative".into()));
    }
    let mut all = vec![0.0];
    let mut rest: Vec<f64> = levels.iter().copied().filter(|&t| t > 0.0).collect();
    rest.sort_by(f64::total_cmp);
    rest.dedup();
    all.extend(rest);
    let samples = body.sample_outer_normals(n_c)?;
    let rows = samples
        .par_iter()
        .map(|s| ThicknessRow {
            sample: *s,
            entries: all.iter().map(|&t| entry(field, mask, s, t)).collect(),
        })
        .collect();
    Ok(ThicknessTable { levels: all, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::oracle::{annulus_solution, oracle_grid};

    fn oracle(h: f64) -> (ScalarField, DomainMask) {
        let s = annulus_solution(2, 0.25, 1.0).unwrap();
        let g = oracle_grid(1.0, h).unwrap();
        (s.sample_to_grid(g).unwrap(), s.domain_mask(g).unwrap())
    }

    fn east() -> NormalSample {
        NormalSample {
            point: Vec2::new(0.25, 0.0),
            normal: Vec2::new(1.0, 0.0),
            arc_index: 0,
        }
    }

    #[test]
    fn profile_values() {
        let (u, _) = oracle(1.0 / 128.0);
        let p = ray_profile(&u, &east(), 0.005).unwrap();
        assert_eq!(p.radii[0], 0.0);
        assert!((p.values[0] - 4f64.ln()).abs() < 1e-12);
        let k = p.radii.iter().position(|r| (r - 0.2).abs() < 1e-9).unwrap();
        assert!((p.values[k] - (1.0f64 / 0.45).ln()).abs() < 1e-5);
        assert!(*p.values.last().unwrap() <= 0.0);
        assert!((p.radii.last().unwrap() - 0.75).abs() < 0.01);
        assert_eq!(p.max_increase(), 0.0);
        assert!(ray_profile(&u, &east(), 1.0).is_err());
    }

    #[test]
    fn oracle_thickness_values() {
        let (u, mask) = oracle(1.0 / 128.0);
        let c = east();
        assert!((outer_extent(&mask, &c).unwrap() - 0.75).abs() < 1e-4);
        assert!((level_thickness(&u, &mask, &c, 0.2).unwrap() - 0.568731).abs() < 1e-4);
        assert!((level_thickness(&u, &mask, &c, 0.5).unwrap() - 0.356531).abs() < 1e-4);
        assert_eq!(level_thickness(&u, &mask, &c, 0.0).unwrap(), outer_extent(&mask, &c).unwrap());
        assert!(matches!(level_thickness(&u, &mask, &c, 2.0), Err(Error::LevelAboveRay { .. })));
        for t in [0.2, 0.5] {
            let m = thickness_derivative(&u, &mask, &c, t, None).unwrap();
            let p = predicted_slope(&u, &mask, &c, t).unwrap();
            assert!((m - p).abs() < 1e-3, "t {t}: {m} vs {p}");
            assert!((p + (-t).exp()).abs() < 1e-3);
        }
    }

    #[test]
    fn extent_on_larger_and_offset_disks() {
        let g = Grid::centered(Vec2::ZERO, Vec2::new(1.6, 1.6), 1.0 / 64.0).unwrap();
        let mask = DomainMask::disk(g, Vec2::ZERO, 1.3).unwrap();
        for s in ConvexBody::disk(Vec2::ZERO, 0.25).unwrap().sample_outer_normals(36).unwrap() {
            assert!((outer_extent(&mask, &s).unwrap() - 1.05).abs() < 1e-4);
        }
        let center = Vec2::new(0.3, -0.2);
        let mask = DomainMask::disk(g, center, 1.0).unwrap();
        let c = NormalSample {
            point: Vec2::new(0.0, 0.1),
            normal: Vec2::new(0.6, 0.8),
            arc_index: 0,
        };
        // |c + sν − center|² = 1
        let d = c.point - center;
        let b = d.dot(c.normal);
        let exact = -b + (b * b - d.norm_sq() + 1.0).sqrt();
        assert!((outer_extent(&mask, &c).unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn table_columns() {
        let (u, mask) = oracle(1.0 / 64.0);
        let body = ConvexBody::disk(Vec2::ZERO, 0.25).unwrap();
        let table = build_table(&u, &mask, &body, 24, &[0.5, 0.2]).unwrap();
        assert_eq!(table.levels, vec![0.0, 0.2, 0.5]);
        for row in &table.rows {
            for (e, expected) in row.entries.iter().zip([0.75, 0.568731, 0.356531]) {
                assert!((e.distance - expected).abs() < 1e-4);
                assert_eq!(e.flag, EntryFlag::Ok);
            }
            assert!(row.is_monotone());
        }
        let only = build_table(&u, &mask, &body, 8, &[]).unwrap();
        assert_eq!(only.levels, vec![0.0]);
        assert!(only.rows.iter().all(|r| r.entries.len() == 1));
        let csv = only.to_csv();
        assert!(csv.starts_with("c_index,cx,cy,nux,nuy,t,d_t,flag\n0,0.25,0,1,0,0,0.75"));
    }

    #[test]
    fn ellipse_rays_cross_once() {
        let g = Grid::centered(Vec2::ZERO, Vec2::new(2.2, 0.8), 1.0 / 32.0).unwrap();
        let mask = DomainMask::ellipse(g, Vec2::ZERO, 2.0, 0.5).unwrap();
        let body = ConvexBody::disk(Vec2::ZERO, 0.05).unwrap();
        for s in body.sample_outer_normals(16).unwrap() {
            let c = outer_extent_detail(&mask, &s).unwrap();
            assert_eq!(c.extra_crossings, 0);
        }
    }
}
