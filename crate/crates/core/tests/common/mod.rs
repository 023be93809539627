//! Independent oracles shared by the integration suites. None of these call
//! into the code paths they are used to check.

#![allow(dead_code)]

pub mod scenes;

use discsplat::math::Vec2;
use nalgebra::Matrix3;

/// Direct Bernstein evaluation, independent of the library's power basis.
pub fn bezier_point(p: &[Vec2], t: f64) -> Vec2 {
    let s = 1.0 - t;
    p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
}

fn poly(c: &[f64; 4], t: f64) -> f64 {
    c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

/// Sum of absolute term magnitudes, the natural scale of the rounding error
/// of evaluating the polynomial at `t`.
pub fn poly_magnitude(c: &[f64; 4], t: f64) -> f64 {
    let a = t.abs();
    c[0].abs() + a * (c[1].abs() + a * (c[2].abs() + a * c[3].abs()))
}

pub fn relative_residual(c: &[f64; 4], t: f64) -> f64 {
    let m = poly_magnitude(c, t);
    if m == 0.0 {
        0.0
    } else {
        poly(c, t).abs() / m
    }
}

/// Real roots in [-1e6, 1e6] found by sign changes over a dense,
/// geometrically spaced grid followed by bisection. Roots of even multiplicity
/// are invisible to this oracle by construction.
pub fn bisection_roots(c: &[f64; 4]) -> Vec<f64> {
    let mut grid = vec![0.0];
    for k in -560..=240 {
        let v = 10f64.powf(k as f64 / 40.0);
        grid.push(v);
        grid.push(-v);
    }
    grid.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    let mut prev_t = grid[0];
    let mut prev_f = poly(c, prev_t);
    if prev_f == 0.0 {
        out.push(prev_t);
    }
    for &t in &grid[1..] {
        let f = poly(c, t);
        if f == 0.0 {
            out.push(t);
        } else if prev_f != 0.0 && (f > 0.0) != (prev_f > 0.0) {
            let (mut lo, mut hi, flo) = (prev_t, t, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = poly(c, mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_f = f;
    }
    out
}

/// Eigenvalues of the companion matrix of the monic cubic, as (re, im).
pub fn companion_eigenvalues(c: &[f64; 4]) -> Vec<(f64, f64)> {
    if c[3] == 0.0 {
        return Vec::new();
    }
    let (a, b, d) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    let m = Matrix3::new(0.0, 0.0, -d, 1.0, 0.0, -b, 0.0, 1.0, -a);
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

/// Minimum distance from `target` to the Bézier curve over `t ∈ [-range, range]`
/// by dense sampling, repeated zooming into every sampled local minimum and a
/// final golden-section refinement.
pub fn min_distance_to_curve(p: &[Vec2], target: Vec2, range: f64) -> f64 {
    let d2 = |t: f64| {
        let q = bezier_point(p, t) - target;
        q.dot(q)
    };
    let mut best = f64::INFINITY;
    let n = (200.0 * range).clamp(20_000.0, 400_000.0) as usize;
    zoom(&d2, -range, range, n, 0, &mut best);
    best.sqrt()
}

fn zoom(d2: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize, depth: usize, best: &mut f64) {
    zoom_with(d2, lo, hi, n, depth, best, &mut |a, b, best| *best = best.min(golden(d2, a, b)));
}

/// Samples `[lo, hi]`, zooms into every sampled local minimum three times and
/// hands the final brackets to `refine`.
fn zoom_with(
    d2: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    depth: usize,
    best: &mut f64,
    refine: &mut dyn FnMut(f64, f64, &mut f64),
) {
    let ts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| d2(t)).collect();
    for v in &vals {
        *best = best.min(*v);
    }
    for i in 1..n {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            if depth < 3 {
                zoom_with(d2, ts[i - 1], ts[i + 1], 64, depth + 1, best, refine);
            } else {
                refine(ts[i - 1], ts[i + 1], best);
            }
        }
    }
}

fn golden(d2: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if d2(x1) < d2(x2) {
            b = x2;
        } else {
            a = x1;
        }
        if b - a < 1e-16 * (1.0 + a.abs()) {
            break;
        }
    }
    d2(0.5 * (a + b))
}

/// Residual of the library implicit form along the parametric curve,
/// `t ∈ [-2, 3]` with `samples` points.
pub fn max_implicit_residual(
    p: &[Vec2],
    imp: &discsplat::bezier::ImplicitCubic,
    samples: usize,
) -> f64 {
    (0..samples)
        .map(|k| -2.0 + 5.0 * k as f64 / (samples - 1) as f64)
        .map(|t| imp.eval(bezier_point(p, t)).abs())
        .fold(0.0, f64::max)
}

/// Central finite difference.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Double-double number `hi + lo`, enough for the far parameters where f64
/// evaluation of a cubic loses whole digits.
#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub fn new(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    fn renorm(s: f64, e: f64) -> Dd {
        let hi = s + e;
        Dd { hi, lo: e - (hi - s) }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, err + self.lo + o.lo)
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn scale(self, k: f64) -> Dd {
        self.mul(Dd::new(k))
    }
}

/// `B(t)` minus `target` in double-double, from the power form.
fn offset_dd(p: &[Vec2], target: Vec2, t: Dd) -> (Dd, Dd) {
    let coord = |c: [f64; 4], goal: f64| {
        let c = c.map(Dd::new);
        let k = [
            c[0],
            c[1].sub(c[0]).scale(3.0),
            c[0].sub(c[1].scale(2.0)).add(c[2]).scale(3.0),
            c[3].sub(c[0]).add(c[1].sub(c[2]).scale(3.0)),
        ];
        k[3].mul(t).add(k[2]).mul(t).add(k[1]).mul(t).add(k[0]).sub(Dd::new(goal))
    };
    (
        coord([p[0].x, p[1].x, p[2].x, p[3].x], target.x),
        coord([p[0].y, p[1].y, p[2].y, p[3].y], target.y),
    )
}

/// Minimum distance from `target` to the whole parametric curve, `t ∈ ℝ`.
/// Minima are located in f64 through `t = tan(θ)`, so far parameters are
/// reachable with a fixed budget, and every final bracket is refined with the
/// curve evaluated in double-double.
pub fn min_distance_unbounded(p: &[Vec2], target: Vec2) -> f64 {
    let d2_theta = |theta: f64| {
        let q = bezier_point(p, theta.tan()) - target;
        q.dot(q)
    };
    let d2_exact = |t: Dd| {
        let (dx, dy) = offset_dd(p, target, t);
        let (dx, dy) = (dx.hi + dx.lo, dy.hi + dy.lo);
        dx * dx + dy * dy
    };
    let half = std::f64::consts::FRAC_PI_2 * (1.0 - 1e-12);
    let mut best = f64::INFINITY;
    let mut exact = f64::INFINITY;
    zoom_with(&d2_theta, -half, half, 20_000, 0, &mut best, &mut |a, b, _| {
        let v = golden_dd(&d2_exact, Dd::new(a.tan()), Dd::new(b.tan()));
        exact = exact.min(v);
    });
    exact.sqrt()
}

fn golden_dd(d2: &dyn Fn(Dd) -> f64, mut a: Dd, mut b: Dd) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..300 {
        let w = b.sub(a);
        if w.hi <= 1e-30 * (1.0 + a.hi.abs()) {
            break;
        }
        let x1 = b.sub(w.scale(g));
        let x2 = a.add(w.scale(g));
        if d2(x1) < d2(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    d2(a.add(b.sub(a).scale(0.5)))
}
