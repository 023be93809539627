//! Values of one control coordinate that make a curve pass through a pixel.

use super::curve::{bernstein, power_coeffs};
use super::roots::{solve_cubic_real, CubicRoots};
use crate::math::{Axis, Vec2};

/// Crossing candidates whose Bernstein weight on the queried control point is
/// below this are dropped: the required coordinate would diverge.
pub const BERNSTEIN_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Empty,
    SingleLeft,
    SingleRight,
    BothSides,
}

/// The candidate set `S_φ` and its position relative to the current value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingSolutions {
    values: [f64; 3],
    len: usize,
    pub side: Side,
    pub nearest_left: Option<f64>,
    pub nearest_right: Option<f64>,
}

impl CrossingSolutions {
    pub const EMPTY: CrossingSolutions = CrossingSolutions {
        values: [0.0; 3],
        len: 0,
        side: Side::Empty,
        nearest_left: None,
        nearest_right: None,
    };

    /// Classifies `values` against `current`. A value equal to `current`
    /// counts as left, matching the sign rule of the interpolation offset.
    pub fn from_values(values: &[f64], current: f64) -> Self {
        let mut out = Self::EMPTY;
        for &v in values.iter().take(3) {
            out.values[out.len] = v;
            out.len += 1;
            if v > current {
                if out.nearest_right.is_none_or(|r| v < r) {
                    out.nearest_right = Some(v);
                }
            } else if out.nearest_left.is_none_or(|l| v > l) {
                out.nearest_left = Some(v);
            }
        }
        out.side = match (out.nearest_left, out.nearest_right) {
            (None, None) => Side::Empty,
            (Some(_), None) => Side::SingleLeft,
            (None, Some(_)) => Side::SingleRight,
            (Some(_), Some(_)) => Side::BothSides,
        };
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The single-side nearest candidate, when exactly one side is populated.
    pub fn nearest(&self) -> Option<f64> {
        match self.side {
            Side::SingleLeft => self.nearest_left,
            Side::SingleRight => self.nearest_right,
            _ => None,
        }
    }
}

/// Solves for the values `φ` of control coordinate `axis` of point
/// `point_index` in curve `curve_index` such that the curve passes through
/// `pixel`.
///
/// The equation on the other axis does not involve `φ`, so it is solved as a
/// cubic in `t`; for each real `t` the queried axis is linear in `φ`.
pub fn crossing_solutions(
    curve_points: &[Vec2],
    curve_index: usize,
    point_index: usize,
    axis: Axis,
    pixel: Vec2,
) -> CrossingSolutions {
    assert!(point_index < 4, "point index {point_index} out of range");
    let base = 4 * curve_index;
    assert!(
        base + 4 <= curve_points.len(),
        "curve index {curve_index} out of range"
    );
    let ctrl = &curve_points[base..base + 4];
    match crossing_times(ctrl, axis, pixel) {
        Some(ts) => solve_for_point(ctrl, ts.as_slice(), point_index, axis, pixel),
        None => CrossingSolutions::EMPTY,
    }
}

/// Crossing sets of all four control points of one curve along `axis`. The
/// cubic in `t` is shared, so this costs one cubic solve.
pub fn crossing_solutions_per_point(ctrl: &[Vec2], axis: Axis, pixel: Vec2) -> [CrossingSolutions; 4] {
    assert!(ctrl.len() == 4, "a cubic curve has four control points");
    match crossing_times(ctrl, axis, pixel) {
        Some(ts) => std::array::from_fn(|i| solve_for_point(ctrl, ts.as_slice(), i, axis, pixel)),
        None => [CrossingSolutions::EMPTY; 4],
    }
}

/// Parameters at which the coordinate other than `axis` matches the pixel.
fn crossing_times(ctrl: &[Vec2], axis: Axis, pixel: Vec2) -> Option<CubicRoots> {
    let other = axis.other();
    let k = power_coeffs(
        ctrl[0].axis(other),
        ctrl[1].axis(other),
        ctrl[2].axis(other),
        ctrl[3].axis(other),
    );
    solve_cubic_real(k[3], k[2], k[1], k[0] - pixel.axis(other)).ok()
}

fn solve_for_point(
    ctrl: &[Vec2],
    ts: &[f64],
    point_index: usize,
    axis: Axis,
    pixel: Vec2,
) -> CrossingSolutions {
    let target = pixel.axis(axis);
    let mut values = [0.0; 3];
    let mut n = 0;
    for &t in ts {
        let b = bernstein(t);
        let weight = b[point_index];
        if weight.abs() < BERNSTEIN_CUTOFF {
            continue;
        }
        let rest: f64 = (0..4)
            .filter(|&j| j != point_index)
            .map(|j| b[j] * ctrl[j].axis(axis))
            .sum();
        let phi = (target - rest) / weight;
        if phi.is_finite() {
            values[n] = phi;
            n += 1;
        }
    }
    CrossingSolutions::from_values(&values[..n], ctrl[point_index].axis(axis))
}
