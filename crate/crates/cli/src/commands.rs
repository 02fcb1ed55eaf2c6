use std::fs;
use std::path::Path;

use quadsurf_core::claims::{run_claims, Case, SuiteReport};
use quadsurf_core::fields::{extract_contour, LevelContour, Polyline};
use quadsurf_core::io::{contours_csv, fmt9, history_csv, overlay_svg, read_field, read_mask, write_field, write_json, write_mask, SvgLayer};
use quadsurf_core::oracle::oracle_grid;
use quadsurf_core::{
    annulus_solution, run_all, solve_quadrature_surface, CheckConfig, ClaimId, ConvexBody, DomainMask, Error,
    FreeBoundaryParams, Grid, MeasureSpec, ScalarField, Scenario, ThicknessTable, Vec2,
};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::output::OutDir;
use crate::{Failure, OracleArgs, SolveArgs, SweepArgs, VerifyArgs};

const MIN_GRID: usize = 16;
const SVG_WIDTH: f64 = 800.0;

fn check_grid(n: usize) -> Result<(), Failure> {
    if n < MIN_GRID {
        return Err(Failure::Usage(format!("grid must be at least {MIN_GRID}, got {n}")));
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_input(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn save_field(out: &mut OutDir, field: &ScalarField) -> Result<(), Failure> {
    write_field(out.path(), "field", field)?;
    out.record("field.f64");
    out.record("field.json");
    Ok(())
}

fn save_mask(out: &mut OutDir, mask: &DomainMask) -> Result<(), Failure> {
    write_mask(out.path(), "mask", mask)?;
    out.record("mask.f64");
    out.record("mask.json");
    Ok(())
}

fn save_body(out: &mut OutDir, body: &ConvexBody) -> Result<(), Failure> {
    write_json(&out.path().join("body.json"), body)?;
    out.record("body.json");
    Ok(())
}

pub fn oracle(a: &OracleArgs) -> Result<(), Failure> {
    check_grid(a.grid)?;
    let sol = annulus_solution(2, a.rho, a.outer)?;
    let grid = oracle_grid(a.outer, 1.0 / a.grid as f64)?;
    let field = sol.sample_to_grid(grid)?;
    let mask = sol.domain_mask(grid)?;
    let mut out = OutDir::open(&a.out)?;
    save_field(&mut out, &field)?;
    save_mask(&mut out, &mask)?;
    save_body(&mut out, &sol.body()?)?;
    out.finish(
        "oracle",
        json!({"rho": a.rho, "R": a.outer, "grid": a.grid, "max_u": sol.max_value()}),
    )
}

fn body_center(body: &ConvexBody) -> Vec2 {
    let (lo, hi) = body.bounding_box();
    (lo + hi) * 0.5
}

pub fn solve(a: &SolveArgs) -> Result<(), Failure> {
    check_grid(a.grid)?;
    let measure = MeasureSpec::from_json(&read_input(&a.measure)?)?;
    let mut params: FreeBoundaryParams = match &a.params {
        Some(p) => read_json(p)?,
        None => FreeBoundaryParams::default(),
    };
    if let Some(m) = a.max_iter {
        params.max_iter = m;
    }
    if !(a.init > 0.0) {
        return Err(Failure::Usage(format!("initial radius must be positive, got {}", a.init)));
    }
    let body = measure.support_hull()?;
    let center = body_center(&body);
    let h = 1.0 / a.grid as f64;
    let (lo, hi) = body.bounding_box();
    let reach = a.init.max(0.5 * (hi - lo).norm());
    let half = 1.25 * reach + 8.0 * h;
    let grid = Grid::centered(center, Vec2::new(half, half), h)?;
    let init = DomainMask::disk(grid, center, a.init)?;

    let mut out = OutDir::open(&a.out)?;
    let parameters = json!({
        "measure": a.measure.display().to_string(),
        "grid": a.grid,
        "init": a.init,
        "params": params,
    });
    save_body(&mut out, &body)?;
    match solve_quadrature_surface(&measure, &init, &params) {
        Ok(res) => {
            out.write("history.csv", history_csv(&res.history))?;
            save_field(&mut out, &res.field)?;
            save_mask(&mut out, &res.mask)?;
            let summary = json!({
                "converged": res.converged,
                "iterations": res.history.len(),
                "max_abs": res.residual.max_abs,
                "mean_abs": res.residual.mean_abs,
                "l2": res.residual.l2,
                "flagged": res.residual.flagged,
                "mean_radius": res.mean_radius(center),
            });
            write_json(&out.path().join("residual.json"), &quadsurf_core::claims::round_json(summary))?;
            out.record("residual.json");
            out.finish("solve", parameters)?;
            if res.converged {
                Ok(())
            } else {
                Err(Failure::NotConverged(format!(
                    "no convergence within {} iterations (max residual {})",
                    params.max_iter,
                    fmt9(res.residual.max_abs)
                )))
            }
        }
        Err(e @ (Error::Collapse { .. } | Error::Divergence { .. } | Error::SolverFailure { .. })) => {
            let summary = json!({"converged": false, "error": e.to_string()});
            write_json(&out.path().join("residual.json"), &summary)?;
            out.record("residual.json");
            out.finish("solve", parameters)?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn level_contours(case: &Case, table: &ThicknessTable) -> Vec<LevelContour> {
    table
        .levels
        .iter()
        .map(|&t| {
            if t == 0.0 {
                LevelContour {
                    level: 0.0,
                    polylines: case.mask.boundary(),
                }
            } else {
                extract_contour(&case.field, t)
            }
        })
        .collect()
}

fn radial_reconstructions(table: &ThicknessTable) -> Vec<Vec<Polyline>> {
    (0..table.levels.len())
        .map(|k| {
            let points: Vec<Vec2> = table
                .rows
                .iter()
                .filter(|r| r.entries[k].distance.is_finite())
                .map(|r| r.sample.point + r.sample.normal * r.entries[k].distance)
                .collect();
            vec![Polyline { points, closed: true }]
        })
        .collect()
}

fn write_verification(out: &mut OutDir, report: &SuiteReport, case: &Case, table: &ThicknessTable) -> Result<(), Failure> {
    out.write("report.json", report.to_json_string())?;
    out.write("thickness.csv", table.to_csv())?;
    let contours = level_contours(case, table);
    out.write("contours.csv", contours_csv(&contours))?;
    let radial = radial_reconstructions(table);
    let body_line = match &case.body {
        ConvexBody::Disk { center, radius } => (0..256)
            .map(|k| *center + Vec2::from_angle(2.0 * std::f64::consts::PI * k as f64 / 256.0) * *radius)
            .collect(),
        ConvexBody::Polygon { vertices } => vertices.clone(),
    };
    let body_lines = [Polyline {
        points: body_line,
        closed: true,
    }];
    let mut layers = vec![SvgLayer {
        class: "body",
        level: f64::NAN,
        polylines: &body_lines,
    }];
    for (c, r) in contours.iter().zip(&radial) {
        layers.push(SvgLayer {
            class: "contour",
            level: c.level,
            polylines: &c.polylines,
        });
        layers.push(SvgLayer {
            class: "radial",
            level: c.level,
            polylines: r,
        });
    }
    out.write("contours.svg", overlay_svg(&layers, SVG_WIDTH))
}

fn load_config(path: &Option<std::path::PathBuf>) -> Result<CheckConfig, Failure> {
    match path {
        Some(p) => read_json(p),
        None => Ok(CheckConfig::default()),
    }
}

pub fn verify(a: &VerifyArgs) -> Result<(), Failure> {
    let config = load_config(&a.config)?;
    if let Some(run) = &a.run {
        return verify_run(run, &config, &a.out);
    }
    let name = a.scenario.as_deref().unwrap_or_default();
    let scenario = Scenario::parse(name).ok_or_else(|| {
        Failure::Usage(format!("unknown scenario {name:?}; expected one of {}", Scenario::NAMES.join(", ")))
    })?;
    if a.grids.is_empty() {
        return Err(Failure::Usage("at least one grid is required".into()));
    }
    for &n in &a.grids {
        check_grid(n)?;
    }
    let mut out = OutDir::open(&a.out)?;
    let (report, outputs) = run_all(&scenario, &a.grids, &config)?;
    let finest = outputs.last().expect("one output per grid");
    let table = finest.table.as_ref().expect("run_all fills tables");
    write_verification(&mut out, &report, &finest.case, table)?;
    if !finest.history.is_empty() {
        out.write("history.csv", history_csv(&finest.history))?;
    }
    out.finish("verify", json!({"scenario": name, "grids": a.grids, "config": config}))
}

fn verify_run(run: &Path, config: &CheckConfig, out_dir: &Path) -> Result<(), Failure> {
    let missing = |e: Error| match e {
        Error::Io(io) => Failure::Usage(format!("{}: {io}", run.display())),
        other => other.into(),
    };
    let field = read_field(&run.join("field.json")).map_err(missing)?;
    let mask = read_mask(&run.join("mask.json")).map_err(missing)?;
    let body: ConvexBody = read_json(&run.join("body.json"))?;
    let n = (1.0 / field.grid().h).round() as usize;
    let case = Case::new(field, mask, body)?;
    let mut out = OutDir::open(out_dir)?;
    let label = format!("run:{}", run.file_name().map_or("".into(), |s| s.to_string_lossy().into_owned()));
    let (report, tables) = run_claims(&label, &[n], std::slice::from_ref(&case), config)?;
    write_verification(&mut out, &report, &case, &tables[0])?;
    out.finish("verify", json!({"run": run.display().to_string(), "config": config}))
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    if a.rho.is_empty() || a.outer.is_empty() || a.grids.is_empty() {
        return Err(Failure::Usage("sweep needs at least one rho, R and grid".into()));
    }
    let base = Scenario::parse(&a.scenario).ok_or_else(|| Failure::Usage(format!("unknown scenario {:?}", a.scenario)))?;
    if matches!(base, Scenario::EllipseControl { .. }) {
        return Err(Failure::Usage("ellipse-control has no (rho, R) parameters to sweep".into()));
    }
    for &n in &a.grids {
        check_grid(n)?;
    }
    for &rho in &a.rho {
        for &outer in &a.outer {
            annulus_solution(2, rho, outer)?;
        }
    }
    let mut out = OutDir::open(&a.out)?;
    let config = CheckConfig::default();
    let mut runs = Vec::new();
    for &rho in &a.rho {
        for &outer in &a.outer {
            let (report, _) = run_all(&base.clone().with_radii(rho, outer), &a.grids, &config)?;
            runs.push((rho, outer, report));
        }
    }
    let mut csv = String::from("claim_id,rho,R,grid,residual_max,residual_mean,level,residual_at_level,verdict\n");
    for id in ClaimId::ALL {
        for (rho, outer, report) in &runs {
            let claim = report.claim(id).expect("every claim is reported");
            let at_level = claim.level_residual(a.level);
            for (k, n) in claim.resolutions.iter().enumerate() {
                let m = &claim.measurements[k];
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    id.as_str(),
                    fmt9(*rho),
                    fmt9(*outer),
                    n,
                    fmt9(m.max),
                    fmt9(m.mean),
                    fmt9(a.level),
                    fmt9(at_level[k]),
                    claim.verdict.as_str()
                ));
            }
        }
    }
    out.write("sweep.csv", csv)?;
    out.finish(
        "sweep",
        json!({"scenario": a.scenario, "rho": a.rho, "R": a.outer, "grids": a.grids, "level": a.level}),
    )
}
