//! Tile-based front-to-back blending with curve scissoring.
//!
//! Each splat's weight at a pixel is `β = α · g · exp(-½ dᵀ Σ⁻¹ d)` where `g`
//! is the product of its curve indicators. The renderer keeps a tape of every
//! contributor so the backward pass can replay the blend without rendering
//! again.

use rayon::prelude::*;

use crate::bezier::{implicitize, CubicBezier, ImplicitCubic};
use crate::error::{Error, Result};
use crate::io::Image;
use crate::math::{Sym2, Vec2};
use crate::projection::{lift_control_points, project_control_points, project_gaussian, Camera};
use crate::scene::{Scene, Splats};

/// Added to both diagonal entries of every image-plane covariance before
/// inversion (pixel²).
pub const COV_REGULARIZATION: f64 = 0.1;

pub const TILE_SIZE: usize = 16;

/// Largest `M` the per-contributor curve mask can hold.
pub const MAX_CURVES: usize = 32;

/// Contribution cutoff and early termination threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterParams {
    /// Contributors with `α · exp(..)` below this are skipped.
    pub min_alpha: f64,
    /// A pixel stops accumulating once its transmittance drops below this.
    pub min_transmittance: f64,
}

impl Default for RasterParams {
    fn default() -> Self {
        Self {
            min_alpha: 1.0 / 255.0,
            min_transmittance: 1e-4,
        }
    }
}

/// A splat ready for rasterization.
#[derive(Debug, Clone)]
pub struct ProjectedSplat {
    /// Index of the source splat in the scene.
    pub source: usize,
    pub mu: Vec2,
    /// Unregularized image-plane covariance.
    pub cov: Sym2,
    /// Inverse of `cov + COV_REGULARIZATION · I`.
    pub inv_cov: Sym2,
    pub color: [f64; 3],
    pub alpha: f64,
    /// Image-plane control points, four per curve.
    pub curve_points: Vec<Vec2>,
    pub curves: Vec<ImplicitCubic>,
    pub depth: f64,
    /// Pixel range `[x0, y0, x1, y1)` holding every pixel above the
    /// contribution cutoff.
    pub bbox: [usize; 4],
}

impl ProjectedSplat {
    /// Builds the splat from its image-plane quantities.
    pub fn new(
        source: usize,
        mu: Vec2,
        cov: Sym2,
        color: [f64; 3],
        alpha: f64,
        curve_points: Vec<Vec2>,
        depth: f64,
        params: &RasterParams,
        width: usize,
        height: usize,
    ) -> Option<Self> {
        let reg = cov.add_diagonal(COV_REGULARIZATION);
        let inv_cov = reg.inverse()?;
        let curves = curve_points
            .chunks_exact(4)
            .map(|c| implicitize(&CubicBezier::from_slice(c)).unwrap_or_else(|_| ImplicitCubic::always_positive()))
            .collect();
        let bbox = cutoff_bbox(mu, reg, alpha, params.min_alpha, width, height);
        Some(Self {
            source,
            mu,
            cov,
            inv_cov,
            color,
            alpha,
            curve_points,
            curves,
            depth,
            bbox,
        })
    }

    /// Bit `k` set when curve `k` keeps the point.
    #[inline]
    pub fn curve_mask(&self, p: Vec2) -> u32 {
        let mut mask = 0;
        for (k, c) in self.curves.iter().enumerate() {
            if c.classify(p) {
                mask |= 1 << k;
            }
        }
        mask
    }

    /// Replaces every curve by one that keeps the whole plane.
    pub fn drop_curves(&mut self) {
        for c in &mut self.curves {
            *c = ImplicitCubic::always_positive();
        }
    }

    #[inline]
    pub fn full_mask(&self) -> u32 {
        full_mask(self.curves.len())
    }
}

#[inline]
pub fn full_mask(m: usize) -> u32 {
    if m >= 32 {
        u32::MAX
    } else {
        (1u32 << m) - 1
    }
}

/// `-½ dᵀ A d`
#[inline]
pub fn gaussian_power(inv_cov: &Sym2, d: Vec2) -> f64 {
    -0.5 * inv_cov.quad_form(d)
}

#[inline]
pub fn pixel_center(x: usize, y: usize) -> Vec2 {
    Vec2::new(x as f64 + 0.5, y as f64 + 0.5)
}

/// Pixels whose centers can pass `α · exp(-½ dᵀ A d) ≥ min_alpha`, i.e.
/// `dᵀ A d ≤ 2 ln(α / min_alpha)`.
fn cutoff_bbox(mu: Vec2, reg: Sym2, alpha: f64, min_alpha: f64, width: usize, height: usize) -> [usize; 4] {
    let r2 = 2.0 * (alpha / min_alpha).ln();
    if !(r2 >= 0.0) || !mu.is_finite() {
        return [0, 0, 0, 0];
    }
    let r = r2.sqrt();
    // a small margin only admits pixels the exact test rejects
    let ex = r * reg.xx.sqrt() * (1.0 + 1e-9) + 1e-9;
    let ey = r * reg.yy.sqrt() * (1.0 + 1e-9) + 1e-9;
    let span = |c: f64, e: f64, n: usize| -> (usize, usize) {
        let lo = (c - e - 0.5).ceil().max(0.0);
        let hi = (c + e - 0.5).floor() + 1.0;
        let hi = hi.min(n as f64);
        if hi <= lo {
            (0, 0)
        } else {
            (lo as usize, hi as usize)
        }
    };
    let (x0, x1) = span(mu.x, ex, width);
    let (y0, y1) = span(mu.y, ey, height);
    if x0 == x1 || y0 == y1 {
        [0, 0, 0, 0]
    } else {
        [x0, y0, x1, y1]
    }
}

/// Projects the scene and sorts it front to back. Flat scenes keep their
/// `depth_key` order; 3D scenes sort by camera depth. Splats that cannot be
/// projected are dropped.
pub fn prepare(
    scene: &Scene,
    cam: Option<&Camera>,
    width: usize,
    height: usize,
    params: &RasterParams,
) -> Result<Vec<ProjectedSplat>> {
    if scene.m > MAX_CURVES {
        return Err(Error::Config(format!("at most {MAX_CURVES} curves per splat")));
    }
    let mut keyed: Vec<(f64, f64, ProjectedSplat)> = match &scene.splats {
        Splats::Flat(v) => v
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let p = ProjectedSplat::new(
                    i,
                    s.center,
                    s.covariance(),
                    s.color,
                    s.alpha(),
                    s.curve_points(),
                    s.depth_key,
                    params,
                    width,
                    height,
                )?;
                Some((s.depth_key, 0.0, p))
            })
            .collect(),
        Splats::Projected(v) => {
            let cam = cam.ok_or_else(|| Error::Mode("projected3d scenes need a camera".into()))?;
            v.iter()
                .enumerate()
                .filter_map(|(i, s)| {
                    let g = project_gaussian(s, cam)?;
                    let pts = project_control_points(&lift_control_points(s), cam)?;
                    let p = ProjectedSplat::new(i, g.mu, g.cov, s.color, s.alpha(), pts, g.depth, params, width, height)?;
                    Some((g.depth, s.depth_key, p))
                })
                .collect()
        }
        Splats::ProjectedCurve3d(v) => {
            let cam = cam.ok_or_else(|| Error::Mode("projected3d_curve3d scenes need a camera".into()))?;
            v.iter()
                .enumerate()
                .filter_map(|(i, s)| {
                    let g = project_gaussian(s, cam)?;
                    let pts = project_control_points(&s.curve, cam)?;
                    let p = ProjectedSplat::new(i, g.mu, g.cov, s.color, s.alpha(), pts, g.depth, params, width, height)?;
                    Some((g.depth, s.depth_key, p))
                })
                .collect()
        }
    };
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.source.cmp(&b.2.source))
    });
    Ok(keyed.into_iter().map(|k| k.2).collect())
}

/// One blended (or scissored) contributor at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapeRecord {
    /// Index into the prepared list.
    pub splat: u32,
    /// Position of the splat in its tile's bin.
    pub slot: u32,
    /// Curve indicator bits; `g = 1` iff every bit of the splat is set.
    pub mask: u32,
    /// `exp(-½ dᵀ A d)`.
    pub weight: f64,
    /// `α · g · weight`.
    pub beta: f64,
    /// Transmittance before this contributor.
    pub t_before: f64,
}

/// Records of one tile, in pixel row-major order inside the tile.
#[derive(Debug, Clone)]
pub struct TileTape {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    /// Prepared-splat indices binned to this tile, front to back.
    pub bin: Vec<u32>,
    /// `ranges[i]` is the record range of the `i`-th pixel of the tile.
    pub ranges: Vec<(u32, u32)>,
    pub records: Vec<TapeRecord>,
    pub t_final: Vec<f64>,
}

impl TileTape {
    pub fn pixel_records(&self, local: usize) -> &[TapeRecord] {
        let (a, b) = self.ranges[local];
        &self.records[a as usize..b as usize]
    }
}

/// Forward output plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct RenderTape {
    pub image: Image,
    pub background: [f64; 3],
    /// Number of prepared splats the tape was rendered from.
    pub num_splats: usize,
    pub tiles: Vec<TileTape>,
}

impl RenderTape {
    fn tile_of(&self, x: usize, y: usize) -> (&TileTape, usize) {
        let cols = self.image.width.div_ceil(TILE_SIZE);
        let t = &self.tiles[(y / TILE_SIZE) * cols + x / TILE_SIZE];
        (t, (y - t.y0) * (t.x1 - t.x0) + (x - t.x0))
    }

    /// Contributors at pixel `(x, y)`, front to back.
    pub fn records(&self, x: usize, y: usize) -> &[TapeRecord] {
        let (t, i) = self.tile_of(x, y);
        t.pixel_records(i)
    }

    pub fn t_final(&self, x: usize, y: usize) -> f64 {
        let (t, i) = self.tile_of(x, y);
        t.t_final[i]
    }

    pub fn record_count(&self) -> usize {
        self.tiles.iter().map(|t| t.records.len()).sum()
    }
}

fn tile_rects(width: usize, height: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for y0 in (0..height).step_by(TILE_SIZE) {
        for x0 in (0..width).step_by(TILE_SIZE) {
            out.push([x0, y0, (x0 + TILE_SIZE).min(width), (y0 + TILE_SIZE).min(height)]);
        }
    }
    out
}

/// Indices of the prepared splats whose bbox overlaps each tile, in order.
fn bin_tiles(prepared: &[ProjectedSplat], width: usize, height: usize) -> Vec<Vec<u32>> {
    let cols = width.div_ceil(TILE_SIZE);
    let rows = height.div_ceil(TILE_SIZE);
    let mut bins = vec![Vec::new(); cols * rows];
    for (i, s) in prepared.iter().enumerate() {
        let [x0, y0, x1, y1] = s.bbox;
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        for ty in y0 / TILE_SIZE..=(y1 - 1) / TILE_SIZE {
            for tx in x0 / TILE_SIZE..=(x1 - 1) / TILE_SIZE {
                bins[ty * cols + tx].push(i as u32);
            }
        }
    }
    bins
}

/// Renders the prepared splats over `background`.
///
/// Contributors below the cutoff are skipped. A contributor above the cutoff
/// but scissored away (`g = 0`) is taped with `β = 0`: it changes nothing in
/// the blend, but the backward pass needs it to move curves back.
pub fn render(
    prepared: &[ProjectedSplat],
    width: usize,
    height: usize,
    background: [f64; 3],
    params: &RasterParams,
) -> RenderTape {
    let bins = bin_tiles(prepared, width, height);
    let tiles: Vec<(TileTape, Vec<[f64; 3]>)> = tile_rects(width, height)
        .into_par_iter()
        .zip(bins.into_par_iter())
        .map(|(rect, bin)| render_tile(prepared, rect, bin, background, params))
        .collect();

    let mut image = Image::new(width, height, background);
    let mut tapes = Vec::with_capacity(tiles.len());
    for (tape, colors) in tiles {
        let w = tape.x1 - tape.x0;
        for (i, c) in colors.into_iter().enumerate() {
            image.pixels[(tape.y0 + i / w) * width + tape.x0 + i % w] = c;
        }
        tapes.push(tape);
    }
    RenderTape {
        image,
        background,
        num_splats: prepared.len(),
        tiles: tapes,
    }
}

fn render_tile(
    prepared: &[ProjectedSplat],
    [x0, y0, x1, y1]: [usize; 4],
    bin: Vec<u32>,
    background: [f64; 3],
    params: &RasterParams,
) -> (TileTape, Vec<[f64; 3]>) {
    let n = (x1 - x0) * (y1 - y0);
    let mut ranges = Vec::with_capacity(n);
    let mut records = Vec::new();
    let mut t_final = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for y in y0..y1 {
        for x in x0..x1 {
            let p = pixel_center(x, y);
            let start = records.len() as u32;
            let mut t = 1.0;
            let mut acc = [0.0; 3];
            for (slot, &si) in bin.iter().enumerate() {
                let s = &prepared[si as usize];
                let [bx0, by0, bx1, by1] = s.bbox;
                if x < bx0 || x >= bx1 || y < by0 || y >= by1 {
                    continue;
                }
                let weight = gaussian_power(&s.inv_cov, p - s.mu).exp();
                let a = s.alpha * weight;
                if a < params.min_alpha {
                    continue;
                }
                let mask = s.curve_mask(p);
                let g = if mask == s.full_mask() { 1.0 } else { 0.0 };
                let beta = a * g;
                records.push(TapeRecord {
                    splat: si,
                    slot: slot as u32,
                    mask,
                    weight,
                    beta,
                    t_before: t,
                });
                if beta == 0.0 {
                    continue;
                }
                for c in 0..3 {
                    acc[c] += s.color[c] * beta * t;
                }
                t *= 1.0 - beta;
                if t < params.min_transmittance {
                    break;
                }
            }
            ranges.push((start, records.len() as u32));
            t_final.push(t);
            colors.push(std::array::from_fn(|c| acc[c] + t * background[c]));
        }
    }
    (
        TileTape {
            x0,
            y0,
            x1,
            y1,
            bin,
            ranges,
            records,
            t_final,
        },
        colors,
    )
}

/// Plain α-blending of the prepared splats, ignoring their curves: a direct
/// per-pixel loop over every splat with no tiling and no tape.
pub fn render_reference(
    prepared: &[ProjectedSplat],
    width: usize,
    height: usize,
    background: [f64; 3],
    params: &RasterParams,
) -> Image {
    Image::from_fn(width, height, |x, y| {
        let p = pixel_center(x, y);
        let mut t = 1.0;
        let mut acc = [0.0; 3];
        for s in prepared {
            let beta = s.alpha * gaussian_power(&s.inv_cov, p - s.mu).exp();
            if beta < params.min_alpha {
                continue;
            }
            for c in 0..3 {
                acc[c] += s.color[c] * beta * t;
            }
            t *= 1.0 - beta;
            if t < params.min_transmittance {
                break;
            }
        }
        std::array::from_fn(|c| acc[c] + t * background[c])
    })
}
