//! Implicit form of a cubic Bézier curve.
//!
//! The curve `(x(t), y(t))` is eliminated in `t` by taking the resultant of
//! `x(t) - X` and `y(t) - Y` through their Bézout matrix. The determinant is
//! expanded exactly into the ten monomial coefficients, so building the
//! implicit form costs a fixed number of arithmetic operations.
//!
//! Coefficients are computed in a local frame (origin at the control point
//! centroid, unit length equal to the largest control point distance) which
//! keeps them well scaled regardless of where the curve sits on the image.
//! The sign is canonicalized so the region to the left of the direction of
//! travel evaluates positive; the same rule orients the straight-line fallback.

use thiserror::Error;

use super::curve::{power_coeffs, CubicBezier};
use crate::math::Vec2;

/// Control points closer to a common line than this fraction of the curve
/// extent switch the indicator to the signed-line form.
pub const COLLINEAR_RELATIVE: f64 = 1e-6;

/// Cubic power coefficients smaller than this (in the local frame) are
/// treated as zero and the curve is implicitized as a conic.
const CUBIC_TERM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ImplicitError {
    #[error("all four control points coincide")]
    Degenerate,
    #[error("control point coordinates must be finite")]
    NonFinite,
}

/// Monomial order of [`ImplicitCubic::gamma`].
pub const MONOMIALS: [&str; 10] = ["xxx", "xxy", "xyy", "yyy", "xx", "xy", "yy", "x", "y", "1"];

/// `gamma · [x³, x²y, xy², y³, x², xy, y², x, y, 1]` in a local frame, or a
/// signed line when the control points are collinear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitCubic {
    pub gamma: [f64; 10],
    /// `(a, b, c)` of `a x + b y + c` in image coordinates, `(a, b)` unit.
    pub degenerate_line: Option<[f64; 3]>,
    origin: Vec2,
    inv_scale: f64,
}

impl ImplicitCubic {
    /// The constant `+1` line: keeps every point. Stands in for curves whose
    /// control points have collapsed.
    pub fn always_positive() -> Self {
        Self {
            gamma: [0.0; 10],
            degenerate_line: Some([0.0, 0.0, 1.0]),
            origin: Vec2::new(0.0, 0.0),
            inv_scale: 1.0,
        }
    }

    /// Signed value at an image-plane point.
    #[inline]
    pub fn eval(&self, p: Vec2) -> f64 {
        if let Some([a, b, c]) = self.degenerate_line {
            return a * p.x + b * p.y + c;
        }
        let u = (p - self.origin) * self.inv_scale;
        eval_monomials(&self.gamma, u.x, u.y)
    }

    /// Single-curve indicator: 1 strictly on the positive side.
    #[inline]
    pub fn classify(&self, p: Vec2) -> bool {
        self.eval(p) > 0.0
    }

    pub fn is_line(&self) -> bool {
        self.degenerate_line.is_some()
    }

    /// Local frame as `(origin, 1 / scale)`; `gamma` is expressed in
    /// `u = (p - origin) / scale`.
    pub fn frame(&self) -> (Vec2, f64) {
        (self.origin, self.inv_scale)
    }

    /// The coefficients re-expanded in image coordinates (same zero set and
    /// sign, different scale). Lines are returned with zero higher-order terms.
    pub fn image_gamma(&self) -> [f64; 10] {
        if let Some([a, b, c]) = self.degenerate_line {
            return [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, a, b, c];
        }
        let s = self.inv_scale;
        let x = Poly::linear(-self.origin.x * s, s, 0.0);
        let y = Poly::linear(-self.origin.y * s, 0.0, s);
        let mut out = Poly::zero();
        let x2 = x.mul(&x);
        let y2 = y.mul(&y);
        let xy = x.mul(&y);
        let terms = [
            x2.mul(&x),
            x2.mul(&y),
            x.mul(&y2),
            y2.mul(&y),
            x2,
            xy,
            y2,
            x,
            y,
            Poly::constant(1.0),
        ];
        for (g, t) in self.gamma.iter().zip(terms.iter()) {
            out = out.add(&t.scale(*g));
        }
        out.0
    }
}

#[inline]
fn eval_monomials(g: &[f64; 10], x: f64, y: f64) -> f64 {
    let cubic = x * (x * (g[0] * x + g[1] * y) + g[2] * y * y) + g[3] * y * y * y;
    let quad = x * (g[4] * x + g[5] * y) + g[6] * y * y;
    cubic + quad + g[7] * x + g[8] * y + g[9]
}

/// Bivariate polynomial of total degree at most three, stored in the
/// monomial order of [`MONOMIALS`].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Poly([f64; 10]);

// exponents (i, j) of x^i y^j for each slot
const EXPONENTS: [(u8, u8); 10] = [
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (2, 0),
    (1, 1),
    (0, 2),
    (1, 0),
    (0, 1),
    (0, 0),
];

fn slot(i: u8, j: u8) -> usize {
    EXPONENTS
        .iter()
        .position(|&e| e == (i, j))
        .expect("degree above three")
}

impl Poly {
    fn zero() -> Self {
        Poly([0.0; 10])
    }

    fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.0[9] = c;
        p
    }

    fn linear(c: f64, cx: f64, cy: f64) -> Self {
        let mut p = Self::constant(c);
        p.0[7] = cx;
        p.0[8] = cy;
        p
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(o.0.iter()) {
            *a += b;
        }
        out
    }

    fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    fn scale(&self, s: f64) -> Poly {
        Poly(self.0.map(|v| v * s))
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = Self::zero();
        for (a, &(ai, aj)) in self.0.iter().zip(EXPONENTS.iter()) {
            if *a == 0.0 {
                continue;
            }
            for (b, &(bi, bj)) in o.0.iter().zip(EXPONENTS.iter()) {
                if *b == 0.0 {
                    continue;
                }
                out.0[slot(ai + bi, aj + bj)] += a * b;
            }
        }
        out
    }
}

/// Bézout matrix of two polynomials in `t` whose coefficients are polynomials
/// in `(X, Y)`: `(f(s) g(t) - f(t) g(s)) / (s - t) = Σ B[i][j] sⁱ tʲ`.
fn bezout<const N: usize>(f: &[Poly], g: &[Poly]) -> [[Poly; N]; N] {
    let mut out = [[Poly::zero(); N]; N];
    for a in 0..=N {
        for b in 0..a {
            let coeff = f[a].mul(&g[b]).sub(&f[b].mul(&g[a]));
            let m = a - b;
            for k in 0..m {
                let (i, j) = (b + k, b + m - 1 - k);
                out[i][j] = out[i][j].add(&coeff);
            }
        }
    }
    out
}

fn det3(m: &[[Poly; 3]; 3]) -> Poly {
    let minor = |r1: usize, r2: usize, c1: usize, c2: usize| {
        m[r1][c1].mul(&m[r2][c2]).sub(&m[r1][c2].mul(&m[r2][c1]))
    };
    m[0][0]
        .mul(&minor(1, 2, 1, 2))
        .sub(&m[0][1].mul(&minor(1, 2, 0, 2)))
        .add(&m[0][2].mul(&minor(1, 2, 0, 1)))
}

fn det2(m: &[[Poly; 2]; 2]) -> Poly {
    m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]))
}

/// Implicit form of `curve` with canonical scale and orientation.
pub fn implicitize(curve: &CubicBezier) -> Result<ImplicitCubic, ImplicitError> {
    if !curve.is_finite() {
        return Err(ImplicitError::NonFinite);
    }
    let pts = curve.points;
    let mut extent = 0.0f64;
    let mut far_pair = (0, 3);
    for i in 0..4 {
        for j in i + 1..4 {
            let d = (pts[j] - pts[i]).norm();
            if d > extent {
                extent = d;
                far_pair = (i, j);
            }
        }
    }
    let magnitude = pts.iter().fold(1.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    if extent <= 1e-14 * magnitude {
        return Err(ImplicitError::Degenerate);
    }

    // signed-line fallback: direction of travel is ω0 -> ω3 unless the curve closes
    let chord = pts[3] - pts[0];
    let dir = if chord.norm() > 1e-9 * extent {
        chord
    } else {
        pts[far_pair.1] - pts[far_pair.0]
    };
    let normal = dir.perp() * (1.0 / dir.norm());
    let anchor = pts[0];
    let off_line = pts
        .iter()
        .map(|p| (*p - anchor).dot(normal).abs())
        .fold(0.0, f64::max);
    if off_line < COLLINEAR_RELATIVE * extent {
        return Ok(ImplicitCubic {
            gamma: [0.0; 10],
            degenerate_line: Some([normal.x, normal.y, -normal.dot(anchor)]),
            origin: anchor,
            inv_scale: 1.0 / extent,
        });
    }

    let origin = (pts[0] + pts[1] + pts[2] + pts[3]) * 0.25;
    let inv_scale = 1.0 / extent;
    let local = pts.map(|p| (p - origin) * inv_scale);
    let kx = power_coeffs(local[0].x, local[1].x, local[2].x, local[3].x);
    let ky = power_coeffs(local[0].y, local[1].y, local[2].y, local[3].y);

    // f(t) = x(t) - X, g(t) = y(t) - Y
    let f: Vec<Poly> = (0..4)
        .map(|i| {
            if i == 0 {
                Poly::linear(kx[0], -1.0, 0.0)
            } else {
                Poly::constant(kx[i])
            }
        })
        .collect();
    let g: Vec<Poly> = (0..4)
        .map(|i| {
            if i == 0 {
                Poly::linear(ky[0], 0.0, -1.0)
            } else {
                Poly::constant(ky[i])
            }
        })
        .collect();

    let resultant = if kx[3].abs().max(ky[3].abs()) > CUBIC_TERM_EPS {
        det3(&bezout::<3>(&f, &g))
    } else {
        det2(&bezout::<2>(&f[..3], &g[..3]))
    };

    let mut gamma = resultant.0;
    let max = gamma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max > 0.0) || !max.is_finite() {
        return Err(ImplicitError::Degenerate);
    }
    for v in gamma.iter_mut() {
        *v /= max;
    }

    let local_curve = CubicBezier { points: local };
    if orientation_score(&gamma, &local_curve) < 0.0 {
        for v in gamma.iter_mut() {
            *v = -*v;
        }
    }

    Ok(ImplicitCubic {
        gamma,
        degenerate_line: None,
        origin,
        inv_scale,
    })
}

fn gradient(g: &[f64; 10], x: f64, y: f64) -> Vec2 {
    let dx = 3.0 * g[0] * x * x + 2.0 * g[1] * x * y + g[2] * y * y + 2.0 * g[4] * x + g[5] * y + g[7];
    let dy = g[1] * x * x + 2.0 * g[2] * x * y + 3.0 * g[3] * y * y + g[5] * x + 2.0 * g[6] * y + g[8];
    Vec2::new(dx, dy)
}

/// Sign of the implicit gradient against the left normal of the tangent, taken
/// at the sample where that alignment is most decisive (avoids cusps and
/// self-intersections, where the gradient vanishes).
fn orientation_score(gamma: &[f64; 10], curve: &CubicBezier) -> f64 {
    const SAMPLES: [f64; 9] = [0.5, 0.25, 0.75, 0.4, 0.6, 0.1, 0.9, 0.0, 1.0];
    let mut best = 0.0f64;
    for &t in &SAMPLES {
        let p = curve.eval(t);
        let tangent = curve.derivative(t);
        let grad = gradient(gamma, p.x, p.y);
        let denom = tangent.norm() * grad.norm();
        if denom == 0.0 {
            continue;
        }
        let s = grad.dot(tangent.perp()) / denom;
        if s.abs() > best.abs() {
            best = s;
        }
        if best.abs() > 0.5 {
            break;
        }
    }
    best
}

/// Multi-curve indicator: the product of the single-curve indicators.
#[inline]
pub fn indicator(curves: &[ImplicitCubic], p: Vec2) -> bool {
    curves.iter().all(|c| c.classify(p))
}
