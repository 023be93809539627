//! Real roots of polynomials of degree at most three.

use thiserror::Error;

/// Leading coefficients below this fraction of the largest coefficient are
/// treated as zero and the polynomial is solved at the next lower degree.
pub const DEGRADE_RELATIVE: f64 = 1e-12;

/// Roots closer than this are merged.
pub const DEDUP_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    Cubic,
    Quadratic,
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RootError {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
}

/// Up to three real roots in ascending order, without allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoots {
    roots: [f64; 3],
    len: usize,
    pub degeneracy: Degeneracy,
}

impl CubicRoots {
    fn empty(degeneracy: Degeneracy) -> Self {
        Self {
            roots: [0.0; 3],
            len: 0,
            degeneracy,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.roots[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn push(&mut self, r: f64) {
        if r.is_finite() && self.len < 3 {
            self.roots[self.len] = r;
            self.len += 1;
        }
    }

    fn finish(mut self) -> Self {
        let s = &mut self.roots[..self.len];
        s.sort_by(f64::total_cmp);
        let mut kept = 0;
        for i in 0..self.len {
            if kept == 0 || self.roots[i] - self.roots[kept - 1] >= DEDUP_DISTANCE {
                self.roots[kept] = self.roots[i];
                kept += 1;
            }
        }
        self.len = kept;
        self
    }
}

#[inline]
fn horner(c: &[f64; 4], t: f64) -> f64 {
    ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
}

#[inline]
fn horner_deriv(c: &[f64; 4], t: f64) -> f64 {
    (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1]
}

/// Newton refinement that never accepts a step which increases the residual.
fn polish(c: &[f64; 4], mut t: f64) -> f64 {
    let mut f = horner(c, t).abs();
    for _ in 0..8 {
        if f == 0.0 {
            break;
        }
        let d = horner_deriv(c, t);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = t - horner(c, t) / d;
        let fnext = horner(c, next).abs();
        if !(fnext < f) {
            break;
        }
        t = next;
        f = fnext;
    }
    t
}

/// All real roots of `a3 t³ + a2 t² + a1 t + a0`.
///
/// Vanishing leading coefficients degrade the problem to a quadratic, linear
/// or constant one; the chosen degree is reported in `degeneracy`.
pub fn solve_cubic_real(a3: f64, a2: f64, a1: f64, a0: f64) -> Result<CubicRoots, RootError> {
    let scale = a3.abs().max(a2.abs()).max(a1.abs()).max(a0.abs());
    if scale == 0.0 {
        return Err(RootError::IdenticallyZero);
    }
    let c = [a0 / scale, a1 / scale, a2 / scale, a3 / scale];

    if c[3].abs() > DEGRADE_RELATIVE {
        let mut out = CubicRoots::empty(Degeneracy::Cubic);
        // the largest candidate is accurate even when the others suffer from
        // cancellation; deflate it out and solve the remaining quadratic
        let first = cubic_candidates(c[3], c[2], c[1], c[0])
            .as_slice()
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()));
        let Some(first) = first else {
            return Ok(out);
        };
        let r = polish(&c, first);
        out.push(r);
        let [q0, q1, q2] = deflate(&c, r);
        for t in quadratic_roots(q2, q1, q0) {
            out.push(polish(&c, t));
        }
        Ok(out.finish())
    } else if c[2].abs() > DEGRADE_RELATIVE {
        // the dropped term still moves large roots, so polish on the full
        // polynomial
        let mut out = CubicRoots::empty(Degeneracy::Quadratic);
        for r in quadratic_roots(c[2], c[1], c[0]) {
            out.push(polish(&c, r));
        }
        Ok(out.finish())
    } else if c[1].abs() > DEGRADE_RELATIVE {
        let mut out = CubicRoots::empty(Degeneracy::Linear);
        out.push(polish(&c, -c[0] / c[1]));
        Ok(out.finish())
    } else {
        Ok(CubicRoots::empty(Degeneracy::Constant))
    }
}

/// Quotient `[q0, q1, q2]` of the cubic by `(t - r)`, evaluated from the end
/// that keeps the division stable for the magnitude of `r`.
fn deflate(c: &[f64; 4], r: f64) -> [f64; 3] {
    if r.abs() <= 1.0 {
        let q2 = c[3];
        let q1 = c[2] + r * q2;
        let q0 = c[1] + r * q1;
        [q0, q1, q2]
    } else {
        let q0 = -c[0] / r;
        let q1 = (q0 - c[1]) / r;
        let q2 = (q1 - c[2]) / r;
        [q0, q1, q2]
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> impl Iterator<Item = f64> {
    let disc = b * b - 4.0 * a * c;
    let mut out = [f64::NAN; 2];
    if a == 0.0 {
        if b != 0.0 {
            out[0] = -c / b;
        }
    } else if disc == 0.0 {
        out[0] = -b / (2.0 * a);
    } else if disc > 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        out[0] = q / a;
        if q != 0.0 {
            out[1] = c / q;
        }
    }
    out.into_iter().filter(|r| r.is_finite())
}

/// Unpolished roots of a cubic with nonzero leading coefficient.
fn cubic_candidates(a: f64, b: f64, c: f64, d: f64) -> CubicRoots {
    let mut out = CubicRoots::empty(Degeneracy::Cubic);
    let b = b / a;
    let c = c / a;
    let d = d / a;
    let shift = b / 3.0;
    // t = u - b/3 gives u³ + p u + q = 0
    let p = c - b * shift;
    let q = 2.0 * shift * shift * shift - shift * c + d;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    if disc > 0.0 {
        let s = disc.sqrt();
        let big = -(half_q + half_q.signum() * s);
        let a_term = big.cbrt();
        let u = if a_term != 0.0 {
            a_term - third_p / a_term
        } else {
            0.0
        };
        out.push(u - shift);
    } else if p == 0.0 {
        out.push(-shift);
    } else {
        let r = 2.0 * (-third_p).sqrt();
        let cos_arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = cos_arg.acos() / 3.0;
        for k in 0..3 {
            let u = r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            out.push(u - shift);
        }
    }
    out
}
