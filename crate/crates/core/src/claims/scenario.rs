use std::f64::consts::PI;

use super::checks::Case;
use crate::error::{Error, Result};
use crate::fields::{DomainMask, Grid};
use crate::freeboundary::{solve_quadrature_surface, FreeBoundaryParams, IterationRecord};
use crate::geometry::ConvexBody;
use crate::measures::MeasureSpec;
use crate::oracle::{annulus_solution, oracle_grid};
use crate::poisson::solve_dirichlet;
use crate::thickness::ThicknessTable;
use crate::vec2::Vec2;

/// Mollification radius of the deposited source, in cells.
const MOLLIFICATION_CELLS: f64 = 4.0;
/// Empty cells kept around the domain on scenario grids.
const MARGIN_CELLS: f64 = 8.0;

/// A named way of producing a field, domain and body at a given resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// The closed-form annulus solution sampled at grid nodes.
    OracleAnnulus { rho: f64, outer: f64 },
    /// The free-boundary solver for a uniform ring of mass 2πR.
    SolverRing {
        rho: f64,
        outer: f64,
        init_radius: f64,
        params: FreeBoundaryParams,
    },
    /// A fixed ellipse with a small central ring source; not a quadrature
    /// surface for it.
    EllipseControl { a: f64, b: f64, inner: f64 },
}

/// One resolution of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub resolution: usize,
    pub case: Case,
    /// Free-boundary history, empty for fixed domains.
    pub history: Vec<IterationRecord>,
    pub converged: Option<bool>,
    pub table: Option<ThicknessTable>,
}

impl Scenario {
    pub const NAMES: [&'static str; 3] = ["oracle-annulus", "solver-ring", "ellipse-control"];

    /// The named scenario with its default parameters.
    pub fn parse(name: &str) -> Option<Scenario> {
        match name {
            "oracle-annulus" => Some(Scenario::OracleAnnulus { rho: 0.25, outer: 1.0 }),
            "solver-ring" => Some(Scenario::SolverRing {
                rho: 0.25,
                outer: 1.0,
                init_radius: 1.3,
                params: FreeBoundaryParams::default(),
            }),
            "ellipse-control" => Some(Scenario::EllipseControl {
                a: 2.0,
                b: 0.5,
                inner: 0.05,
            }),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::OracleAnnulus { .. } => "oracle-annulus",
            Scenario::SolverRing { .. } => "solver-ring",
            Scenario::EllipseControl { .. } => "ellipse-control",
        }
        .to_string()
    }

    /// Replaces ρ and R where the scenario has them.
    pub fn with_radii(self, new_rho: f64, new_outer: f64) -> Scenario {
        match self {
            Scenario::OracleAnnulus { .. } => Scenario::OracleAnnulus {
                rho: new_rho,
                outer: new_outer,
            },
            Scenario::SolverRing { init_radius, params, outer, .. } => Scenario::SolverRing {
                rho: new_rho,
                outer: new_outer,
                init_radius: init_radius * new_outer / outer,
                params,
            },
            other => other,
        }
    }

    /// Builds the case on the grid with h = 1/n.
    pub fn build(&self, n: usize) -> Result<ScenarioOutput> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("resolution must be at least 2, got {n}")));
        }
        let h = 1.0 / n as f64;
        let solver_exclusion = (4.0 * h).max(MOLLIFICATION_CELLS * h + 2.0 * h);
        match self {
            Scenario::OracleAnnulus { rho, outer } => {
                let sol = annulus_solution(2, *rho, *outer)?;
                let grid = oracle_grid(*outer, h)?;
                let mut case = Case::new(sol.sample_to_grid(grid)?, sol.domain_mask(grid)?, sol.body()?)?;
                case.max_u = sol.max_value();
                Ok(fixed(n, case))
            }
            Scenario::SolverRing {
                rho,
                outer,
                init_radius,
                params,
            } => {
                let measure = MeasureSpec::ring(Vec2::ZERO, *rho, 2.0 * PI * outer);
                let half = 1.25 * init_radius.max(*outer) + MARGIN_CELLS * h;
                let grid = Grid::centered(Vec2::ZERO, Vec2::new(half, half), h)?;
                let init = DomainMask::disk(grid, Vec2::ZERO, *init_radius)?;
                let out = solve_quadrature_surface(&measure, &init, params)?;
                let exclusion = (4.0 * h).max(params.mollification_cells * h + 2.0 * h);
                let case = Case::new(out.field, out.mask, measure.support_hull()?)?.with_exclusion(exclusion);
                Ok(ScenarioOutput {
                    resolution: n,
                    case,
                    history: out.history,
                    converged: Some(out.converged),
                    table: None,
                })
            }
            Scenario::EllipseControl { a, b, inner } => {
                let m = MARGIN_CELLS * h;
                let grid = Grid::centered(Vec2::ZERO, Vec2::new(a + m, b + m), h)?;
                let mask = DomainMask::ellipse(grid, Vec2::ZERO, *a, *b)?;
                let measure = MeasureSpec::ring(Vec2::ZERO, *inner, 2.0 * PI);
                let rhs = measure.deposit(&grid, MOLLIFICATION_CELLS * h)?;
                let field = solve_dirichlet(&mask, &rhs, 1e-10)?;
                let body = ConvexBody::disk(Vec2::ZERO, *inner)?;
                let case = Case::new(field, mask, body)?.with_exclusion(solver_exclusion);
                Ok(fixed(n, case))
            }
        }
    }
}

fn fixed(resolution: usize, case: Case) -> ScenarioOutput {
    ScenarioOutput {
        resolution,
        case,
        history: Vec::new(),
        converged: None,
        table: None,
    }
}
