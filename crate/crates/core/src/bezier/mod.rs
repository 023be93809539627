//! Cubic Bézier geometry: evaluation, implicit form, point classification,
//! real cubic roots and the pixel-crossing solver used for boundary gradients.

mod crossing;
mod curve;
mod implicit;
mod roots;

pub use crossing::{crossing_solutions, crossing_solutions_per_point, CrossingSolutions, Side, BERNSTEIN_CUTOFF};
pub use curve::{bernstein, power_coeffs, CubicBezier, PowerCoeffs};
pub use implicit::{
    implicitize, indicator, ImplicitCubic, ImplicitError, COLLINEAR_RELATIVE, MONOMIALS,
};
pub use roots::{solve_cubic_real, CubicRoots, Degeneracy, RootError, DEDUP_DISTANCE, DEGRADE_RELATIVE};

/// Implicit forms of the `M` curves stored as consecutive groups of four
/// control points.
pub fn implicitize_all(points: &[crate::math::Vec2]) -> Result<Vec<ImplicitCubic>, ImplicitError> {
    points
        .chunks_exact(4)
        .map(|c| implicitize(&CubicBezier::from_slice(c)))
        .collect()
}
