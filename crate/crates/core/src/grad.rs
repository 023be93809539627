//! Reverse pass through the scissored blend.
//!
//! Continuous parameters get exact gradients. The indicator `g` is piecewise
//! constant in the curve control points, so its derivative is approximated per
//! pixel: for each control coordinate, find the values that would put the
//! curve through the pixel and interpolate the indicator flip over the
//! distance to the nearest of them.

use rayon::prelude::*;

use crate::bezier::{crossing_solutions_per_point, CrossingSolutions, Side};
use crate::error::{Error, Result};
use crate::io::Image;
use crate::math::{Axis, Sym2, Vec2};
use crate::raster::{pixel_center, ProjectedSplat, RenderTape, TapeRecord, TileTape, COV_REGULARIZATION};
use crate::scene::Scene;

/// Offset keeping the interpolated curve gradient finite when the nearest
/// crossing value equals the current one.
pub const EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipDecision {
    /// The loss does not depend on the indicator here.
    SkipOptimal,
    /// The loss wants a smaller indicator, which is already 0.
    SkipAtMin,
    /// The loss wants a larger indicator, which is already 1.
    SkipAtMax,
    Proceed,
}

/// `delta` is `∂L/∂g` for one curve at one pixel.
#[inline]
pub fn classify_skip(delta: f64, g: bool) -> SkipDecision {
    if delta == 0.0 {
        SkipDecision::SkipOptimal
    } else if delta > 0.0 && !g {
        SkipDecision::SkipAtMin
    } else if delta < 0.0 && g {
        SkipDecision::SkipAtMax
    } else {
        SkipDecision::Proceed
    }
}

/// Approximate `∂g/∂φ` from the crossing values of one control coordinate.
pub fn approx_curve_grad(crossing: &CrossingSolutions, current: f64, g: bool) -> f64 {
    let (g, flipped) = if g { (1.0, 0.0) } else { (0.0, 1.0) };
    let term = |target: f64, eps: f64| (flipped - g) / ((target - current) + eps);
    match crossing.side {
        Side::Empty => 0.0,
        Side::SingleLeft | Side::SingleRight => {
            let target = crossing.nearest().expect("single side has a nearest value");
            let eps = if target > current { EPSILON } else { -EPSILON };
            term(target, eps)
        }
        Side::BothSides => {
            let left = crossing.nearest_left.expect("both sides");
            let right = crossing.nearest_right.expect("both sides");
            term(left, -EPSILON) + term(right, EPSILON)
        }
    }
}

/// Gradients of one contributor at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendGrad {
    pub d_color: [f64; 3],
    pub d_beta: f64,
}

/// Reverses the front-to-back accumulation of one pixel.
///
/// With `S` the normalized color of everything behind a contributor,
/// `C = prefix + T (c β + (1 - β) S)`, so `∂C/∂β = T (c - S)`; `S` is
/// rebuilt back to front starting from the background.
pub fn backward_blend_pixel(
    records: &[TapeRecord],
    color_of: impl Fn(u32) -> [f64; 3],
    background: [f64; 3],
    d_pixel: [f64; 3],
    out: &mut Vec<BlendGrad>,
) {
    out.clear();
    out.resize(
        records.len(),
        BlendGrad {
            d_color: [0.0; 3],
            d_beta: 0.0,
        },
    );
    let mut behind = background;
    for (i, r) in records.iter().enumerate().rev() {
        let c = color_of(r.splat);
        let t = r.t_before;
        let mut d_beta = 0.0;
        for ch in 0..3 {
            d_beta += d_pixel[ch] * t * (c[ch] - behind[ch]);
        }
        out[i] = BlendGrad {
            d_color: d_pixel.map(|d| d * r.beta * t),
            d_beta,
        };
        for ch in 0..3 {
            behind[ch] = c[ch] * r.beta + (1.0 - r.beta) * behind[ch];
        }
    }
}

/// Gradients with respect to the image-plane quantities of one splat.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedGrad {
    pub d_mu: Vec2,
    /// `∂L/∂A` for the regularized inverse covariance `A`, entries taken
    /// independently (`xy` is the gradient of each off-diagonal entry).
    pub d_inv_cov: Sym2,
    pub d_alpha: f64,
    pub d_color: [f64; 3],
    /// Image-plane control point gradients, four per curve.
    pub d_curve: Vec<Vec2>,
}

impl ProjectedGrad {
    pub fn zeros(points: usize) -> Self {
        Self {
            d_mu: Vec2::new(0.0, 0.0),
            d_inv_cov: Sym2::default(),
            d_alpha: 0.0,
            d_color: [0.0; 3],
            d_curve: vec![Vec2::new(0.0, 0.0); points],
        }
    }

    fn add(&mut self, o: &ProjectedGrad) {
        self.d_mu += o.d_mu;
        self.d_inv_cov.xx += o.d_inv_cov.xx;
        self.d_inv_cov.xy += o.d_inv_cov.xy;
        self.d_inv_cov.yy += o.d_inv_cov.yy;
        self.d_alpha += o.d_alpha;
        for c in 0..3 {
            self.d_color[c] += o.d_color[c];
        }
        for (a, b) in self.d_curve.iter_mut().zip(&o.d_curve) {
            *a += *b;
        }
    }
}

/// Results of differentiating `β = α g exp(-½ dᵀ A d)` for one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGrad {
    pub d_mu: Vec2,
    pub d_inv_cov: Sym2,
    pub d_alpha: f64,
}

/// Chain rule through the exponential for one record. `d` is `p - μ`.
pub fn backward_gaussian(s: &ProjectedSplat, r: &TapeRecord, d: Vec2, d_beta: f64) -> GaussianGrad {
    let g = if r.mask == s.full_mask() { 1.0 } else { 0.0 };
    let d_alpha = d_beta * g * r.weight;
    // ∂β/∂power = β
    let d_power = d_beta * r.beta;
    let ad = s.inv_cov.mul_vec(d);
    GaussianGrad {
        d_mu: ad * d_power,
        d_inv_cov: Sym2::new(
            -0.5 * d_power * d.x * d.x,
            -0.5 * d_power * d.x * d.y,
            -0.5 * d_power * d.y * d.y,
        ),
        d_alpha,
    }
}

/// `∂L/∂g_k` for every curve `k` of a record: `∂L/∂β · α · w` times the
/// product of the other curves' indicators.
pub fn curve_deltas(s: &ProjectedSplat, r: &TapeRecord, d_beta: f64, out: &mut Vec<f64>) {
    let full = s.full_mask();
    out.clear();
    out.extend((0..s.curves.len()).map(|k| {
        if (r.mask | (1 << k)) == full {
            d_beta * s.alpha * r.weight
        } else {
            0.0
        }
    }));
}

/// Counters describing one backward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BackwardStats {
    pub records: u64,
    pub skip_optimal: u64,
    pub skip_at_min: u64,
    pub skip_at_max: u64,
    pub proceed: u64,
    /// Coordinates with no real crossing among the proceeding triples.
    pub empty_crossings: u64,
    pub max_abs_curve_grad: f64,
}

impl BackwardStats {
    fn add(&mut self, o: &BackwardStats) {
        self.records += o.records;
        self.skip_optimal += o.skip_optimal;
        self.skip_at_min += o.skip_at_min;
        self.skip_at_max += o.skip_at_max;
        self.proceed += o.proceed;
        self.empty_crossings += o.empty_crossings;
        self.max_abs_curve_grad = self.max_abs_curve_grad.max(o.max_abs_curve_grad);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardOptions {
    /// Run the curve gradient approximation.
    pub curves: bool,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        Self { curves: true }
    }
}

/// Gradients of one flat splat's raw parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatGrad {
    pub d_center: Vec2,
    pub d_theta: f64,
    pub d_log_scales: [f64; 2],
    pub d_raw_opacity: f64,
    pub d_color: [f64; 3],
    pub d_c_curve: Vec<Vec2>,
}

impl SplatGrad {
    pub fn zeros(points: usize) -> Self {
        Self {
            d_center: Vec2::new(0.0, 0.0),
            d_theta: 0.0,
            d_log_scales: [0.0; 2],
            d_raw_opacity: 0.0,
            d_color: [0.0; 3],
            d_c_curve: vec![Vec2::new(0.0, 0.0); points],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_center.is_finite()
            && self.d_theta.is_finite()
            && self.d_log_scales.iter().chain(&self.d_color).all(|v| v.is_finite())
            && self.d_raw_opacity.is_finite()
            && self.d_c_curve.iter().all(|c| c.is_finite())
    }
}

/// Per-splat gradients indexed like the scene's splats.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub splats: Vec<SplatGrad>,
    pub stats: BackwardStats,
}

/// Backward pass of a flat scene.
///
/// Tiles are processed independently and their partial sums are reduced in
/// tile order, so the result does not depend on the thread count. Curve
/// gradients stop at the local frame: they reach `c_curve` only, never the
/// center or rotation.
pub fn backward(
    scene: &Scene,
    prepared: &[ProjectedSplat],
    tape: &RenderTape,
    d_image: &Image,
    opts: &BackwardOptions,
) -> Result<GradientBuffer> {
    let flat = scene.flat()?;
    if tape.num_splats != prepared.len() {
        return Err(Error::Shape(format!(
            "tape rendered from {} splats, {} given",
            tape.num_splats,
            prepared.len()
        )));
    }
    d_image.same_shape(&tape.image)?;
    let points = 4 * scene.m;

    let partials: Vec<(Vec<ProjectedGrad>, BackwardStats)> = tape
        .tiles
        .par_iter()
        .map(|tile| backward_tile(prepared, tile, tape.background, d_image, points, opts))
        .collect();

    let mut proj: Vec<ProjectedGrad> = vec![ProjectedGrad::zeros(points); prepared.len()];
    let mut stats = BackwardStats::default();
    for ((local, st), tile) in partials.iter().zip(&tape.tiles) {
        for (slot, g) in local.iter().enumerate() {
            proj[tile.bin[slot] as usize].add(g);
        }
        stats.add(st);
    }

    let mut splats = vec![SplatGrad::zeros(points); flat.len()];
    for (p, g) in prepared.iter().zip(&proj) {
        let s = &flat[p.source];
        splats[p.source] = chain_to_flat(s.theta, s.scales(), s.alpha(), p.cov, g);
    }
    Ok(GradientBuffer { splats, stats })
}

fn backward_tile(
    prepared: &[ProjectedSplat],
    tile: &TileTape,
    background: [f64; 3],
    d_image: &Image,
    points: usize,
    opts: &BackwardOptions,
) -> (Vec<ProjectedGrad>, BackwardStats) {
    let mut local = vec![ProjectedGrad::zeros(points); tile.bin.len()];
    let mut stats = BackwardStats::default();
    let mut blend = Vec::new();
    let mut deltas = Vec::new();
    let w = tile.x1 - tile.x0;
    for (i, &(a, b)) in tile.ranges.iter().enumerate() {
        let records = &tile.records[a as usize..b as usize];
        if records.is_empty() {
            continue;
        }
        let (x, y) = (tile.x0 + i % w, tile.y0 + i / w);
        let p = pixel_center(x, y);
        let d_pixel = d_image.get(x, y);
        backward_blend_pixel(
            records,
            |si| prepared[si as usize].color,
            background,
            d_pixel,
            &mut blend,
        );
        stats.records += records.len() as u64;
        for (r, bg) in records.iter().zip(&blend) {
            let s = &prepared[r.splat as usize];
            let acc = &mut local[r.slot as usize];
            for c in 0..3 {
                acc.d_color[c] += bg.d_color[c];
            }
            let gg = backward_gaussian(s, r, p - s.mu, bg.d_beta);
            acc.d_mu += gg.d_mu;
            acc.d_inv_cov.xx += gg.d_inv_cov.xx;
            acc.d_inv_cov.xy += gg.d_inv_cov.xy;
            acc.d_inv_cov.yy += gg.d_inv_cov.yy;
            acc.d_alpha += gg.d_alpha;
            if opts.curves {
                curve_deltas(s, r, bg.d_beta, &mut deltas);
                accumulate_curves(s, r.mask, p, &deltas, &mut acc.d_curve, &mut stats);
            }
        }
    }
    (local, stats)
}

/// Adds `δ_k · ∂g_k/∂φ` to every control coordinate of every curve whose
/// skip decision is to proceed.
pub fn accumulate_curves(
    s: &ProjectedSplat,
    mask: u32,
    p: Vec2,
    deltas: &[f64],
    d_curve: &mut [Vec2],
    stats: &mut BackwardStats,
) {
    for (k, &delta) in deltas.iter().enumerate() {
        let g = mask & (1 << k) != 0;
        match classify_skip(delta, g) {
            SkipDecision::SkipOptimal => stats.skip_optimal += 1,
            SkipDecision::SkipAtMin => stats.skip_at_min += 1,
            SkipDecision::SkipAtMax => stats.skip_at_max += 1,
            SkipDecision::Proceed => {
                stats.proceed += 1;
                let ctrl = &s.curve_points[4 * k..4 * k + 4];
                for axis in Axis::BOTH {
                    let sols = crossing_solutions_per_point(ctrl, axis, p);
                    for (j, sol) in sols.iter().enumerate() {
                        if sol.is_empty() {
                            stats.empty_crossings += 1;
                            continue;
                        }
                        let a = approx_curve_grad(sol, ctrl[j].axis(axis), g);
                        let v = a * delta;
                        stats.max_abs_curve_grad = stats.max_abs_curve_grad.max(v.abs());
                        *d_curve[4 * k + j].axis_mut(axis) += v;
                    }
                }
            }
        }
    }
}

/// Maps image-plane gradients to the raw parameters of a flat splat.
pub fn chain_to_flat(theta: f64, scales: [f64; 2], alpha: f64, cov: Sym2, g: &ProjectedGrad) -> SplatGrad {
    // A = (Σ + λI)⁻¹  ⇒  dΣ = -A G A
    let a = cov
        .add_diagonal(COV_REGULARIZATION)
        .inverse()
        .expect("prepared splats have invertible covariance");
    let d_sigma = sym_sandwich(&a, &g.d_inv_cov);
    let d_sigma = Sym2::new(-d_sigma.xx, -d_sigma.xy, -d_sigma.yy);

    let (s, c) = theta.sin_cos();
    let (va, vb) = (scales[0] * scales[0], scales[1] * scales[1]);
    // Σ = [[c²a + s²b, cs(a-b)], [cs(a-b), s²a + c²b]]
    let d_theta = (d_sigma.yy - d_sigma.xx) * 2.0 * s * c * (va - vb)
        + 2.0 * d_sigma.xy * (c * c - s * s) * (va - vb);
    let d_va = d_sigma.xx * c * c + 2.0 * d_sigma.xy * c * s + d_sigma.yy * s * s;
    let d_vb = d_sigma.xx * s * s - 2.0 * d_sigma.xy * c * s + d_sigma.yy * c * c;

    let r1 = Vec2::new(c, s);
    let r2 = Vec2::new(-s, c);
    SplatGrad {
        d_center: g.d_mu,
        d_theta,
        d_log_scales: [d_va * 2.0 * va, d_vb * 2.0 * vb],
        d_raw_opacity: g.d_alpha * alpha * (1.0 - alpha),
        d_color: g.d_color,
        d_c_curve: g
            .d_curve
            .iter()
            .map(|d| Vec2::new(d.dot(r1), d.dot(r2)))
            .collect(),
    }
}

/// `A G A` for symmetric `A` and `G`.
fn sym_sandwich(a: &Sym2, g: &Sym2) -> Sym2 {
    // (A G) then (A G) A
    let ag = [
        [a.xx * g.xx + a.xy * g.xy, a.xx * g.xy + a.xy * g.yy],
        [a.xy * g.xx + a.yy * g.xy, a.xy * g.xy + a.yy * g.yy],
    ];
    Sym2::new(
        ag[0][0] * a.xx + ag[0][1] * a.xy,
        ag[0][0] * a.xy + ag[0][1] * a.yy,
        ag[1][0] * a.xy + ag[1][1] * a.yy,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skip_situations() {
        assert_eq!(classify_skip(0.0, true), SkipDecision::SkipOptimal);
        assert_eq!(classify_skip(0.0, false), SkipDecision::SkipOptimal);
        assert_eq!(classify_skip(0.3, false), SkipDecision::SkipAtMin);
        assert_eq!(classify_skip(-0.3, true), SkipDecision::SkipAtMax);
        assert_eq!(classify_skip(-0.3, false), SkipDecision::Proceed);
        assert_eq!(classify_skip(0.3, true), SkipDecision::Proceed);
    }

    #[test]
    fn approximation_examples() {
        let empty = CrossingSolutions::from_values(&[], 0.0);
        assert_eq!(approx_curve_grad(&empty, 0.0, false), 0.0);

        let single = CrossingSolutions::from_values(&[12.0], 0.0);
        let v = approx_curve_grad(&single, 0.0, false);
        assert!((v - 1.0 / (12.0 + 1e-5)).abs() < 1e-15);
        assert!((v - 0.0833326).abs() < 1e-6);

        let both = CrossingSolutions::from_values(&[-3.0, 5.0], 0.0);
        let v = approx_curve_grad(&both, 0.0, true);
        assert!((v - (-1.0 / (-3.0 - 1e-5) - 1.0 / (5.0 + 1e-5))).abs() < 1e-15);
        assert!((v - 0.13333).abs() < 1e-5);
    }

    #[test]
    fn equal_crossing_counts_as_left() {
        let s = CrossingSolutions::from_values(&[2.0], 2.0);
        assert_eq!(s.side, Side::SingleLeft);
        assert!((approx_curve_grad(&s, 2.0, true) - 1e5).abs() < 1e-6);
    }

    #[test]
    fn single_contributor_with_full_weight_passes_gradient_to_color() {
        let r = TapeRecord {
            splat: 0,
            slot: 0,
            mask: 1,
            weight: 1.0,
            beta: 1.0,
            t_before: 1.0,
        };
        let mut out = Vec::new();
        backward_blend_pixel(&[r], |_| [0.3, 0.2, 0.1], [0.0; 3], [1.0, -2.0, 0.5], &mut out);
        assert_eq!(out[0].d_color, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn fully_hidden_contributor_gets_nothing() {
        let front = TapeRecord {
            splat: 0,
            slot: 0,
            mask: 1,
            weight: 1.0,
            beta: 1.0,
            t_before: 1.0,
        };
        let back = TapeRecord {
            splat: 1,
            t_before: 0.0,
            beta: 0.5,
            ..front
        };
        let mut out = Vec::new();
        backward_blend_pixel(&[front, back], |_| [0.3, 0.2, 0.1], [0.0; 3], [1.0, 1.0, 1.0], &mut out);
        assert_eq!(out[1].d_color, [0.0; 3]);
        assert_eq!(out[1].d_beta, 0.0);
    }

    #[test]
    fn sandwich_matches_matrix_product() {
        let a = Sym2::new(2.0, 0.5, 1.0);
        let g = Sym2::new(0.3, -0.2, 0.7);
        let full = |m: &Sym2| [[m.xx, m.xy], [m.xy, m.yy]];
        let (am, gm) = (full(&a), full(&g));
        let mut want = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        want[i][j] += am[i][k] * gm[k][l] * am[l][j];
                    }
                }
            }
        }
        let got = sym_sandwich(&a, &g);
        assert!((got.xx - want[0][0]).abs() < 1e-14);
        assert!((got.xy - want[0][1]).abs() < 1e-14);
        assert!((got.yy - want[1][1]).abs() < 1e-14);
    }
}
