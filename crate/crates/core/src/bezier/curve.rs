use serde::{Deserialize, Serialize};

use crate::math::{Axis, Vec2};

/// Cubic Bézier with four ordered control points.
///
/// The parameter is not restricted to `[0, 1]`: the scissor boundary is the
/// whole algebraic curve traced for every real `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBezier {
    pub points: [Vec2; 4],
}

/// Power-basis coefficients `[c0, c1, c2, c3]` of one coordinate, so that
/// `coord(t) = c0 + c1 t + c2 t² + c3 t³`.
pub type PowerCoeffs = [f64; 4];

impl CubicBezier {
    pub fn new(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2) -> Self {
        Self {
            points: [p0, p1, p2, p3],
        }
    }

    pub fn from_slice(points: &[Vec2]) -> Self {
        Self {
            points: [points[0], points[1], points[2], points[3]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        let b = bernstein(t);
        let [p0, p1, p2, p3] = self.points;
        p0 * b[0] + p1 * b[1] + p2 * b[2] + p3 * b[3]
    }

    /// First derivative with respect to `t`.
    pub fn derivative(&self, t: f64) -> Vec2 {
        let [p0, p1, p2, p3] = self.points;
        let s = 1.0 - t;
        (p1 - p0) * (3.0 * s * s) + (p2 - p1) * (6.0 * s * t) + (p3 - p2) * (3.0 * t * t)
    }

    pub fn power_coeffs(&self, axis: Axis) -> PowerCoeffs {
        let [p0, p1, p2, p3] = self.points.map(|p| p.axis(axis));
        power_coeffs(p0, p1, p2, p3)
    }

    pub fn reversed(&self) -> Self {
        let [p0, p1, p2, p3] = self.points;
        Self::new(p3, p2, p1, p0)
    }
}

/// Cubic Bernstein basis `[(1-t)³, 3(1-t)²t, 3(1-t)t², t³]`.
#[inline]
pub fn bernstein(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t]
}

#[inline]
pub fn power_coeffs(p0: f64, p1: f64, p2: f64, p3: f64) -> PowerCoeffs {
    [
        p0,
        3.0 * (p1 - p0),
        3.0 * (p0 - 2.0 * p1 + p2),
        p3 - p0 + 3.0 * (p1 - p2),
    ]
}
