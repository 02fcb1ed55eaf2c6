//! Uniform-grid scalar fields, implicit domains and level contours.

mod contour;
mod grid;
mod mask;
mod redistance;
mod scalar;

pub use contour::{extract_contour, hausdorff, LevelContour, Polyline};
pub use grid::Grid;
pub use mask::{ellipse_signed_distance, DomainMask};
pub use redistance::redistance;
pub use scalar::{laplacian_of_w, Derivative, Interpolation, Sample, ScalarField};
