//! Numerical laboratory for quadrature surfaces: the overdetermined problem
//! −Δu = μ in Ω, u = 0 and |∇u| = 1 on ∂Ω.
//!
//! The crate solves the problem on uniform grids, measures the thickness
//! function along outer normal rays of the convex hull of supp μ, and checks
//! a catalogue of geometric claims about such solutions against closed-form
//! radial solutions.

pub mod claims;
pub mod error;
pub mod fields;
pub mod freeboundary;
pub mod geometry;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod poisson;
pub mod thickness;
pub mod vec2;

pub use claims::{run_all, CheckConfig, ClaimId, ClaimReport, Scenario, SuiteReport, Verdict};
pub use error::{Error, Result};
pub use fields::{DomainMask, Grid, Interpolation, LevelContour, Polyline, ScalarField};
pub use measures::{DiscretizedMeasure, MeasureSpec};
pub use oracle::{annulus_solution, RadialSolution};
pub use poisson::{boundary_normal_derivative, solve_dirichlet, BoundarySample, SolverOptions};
pub use freeboundary::{
    overdetermined_residual, solve_quadrature_surface, FreeBoundaryParams, FreeBoundaryResult, IterationRecord, ResidualStats,
};
pub use geometry::{ConvexBody, NormalRay, NormalSample, RadialDecomposition};
pub use thickness::{build_table, RayProfile, ThicknessTable};
pub use vec2::Vec2;
