//! Random scenes and a finite-difference harness built only on the public
//! forward renderer.

use discsplat::fit::loss::l1;
use discsplat::io::Image;
use discsplat::math::Vec2;
use discsplat::raster::{prepare, render, RasterParams, RenderTape};
use discsplat::scene::{non_cutting_arcs, FlatSplat, Scene, Splats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const W: usize = 32;
pub const H: usize = 32;

/// Up to eight splats with a mix of cutting and non-cutting curves.
pub fn random_scene(seed: u64) -> (Scene, Image) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=3);
    let splats = (0..n)
        .map(|i| {
            let scales = [rng.gen_range(1.5..6.0), rng.gen_range(1.5..6.0)];
            let mut c_curve = non_cutting_arcs(scales, m);
            if rng.gen_bool(0.5) {
                // pull one curve through the splat
                let k = rng.gen_range(0..m);
                let off = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                for j in 0..4 {
                    c_curve[4 * k + j] = c_curve[4 * k + j] * 0.2 + off;
                }
            }
            FlatSplat {
                center: Vec2::new(rng.gen_range(2.0..30.0), rng.gen_range(2.0..30.0)),
                theta: rng.gen_range(0.0..3.1),
                log_scales: scales.map(f64::ln),
                raw_opacity: rng.gen_range(-1.0..2.0),
                color: [rng.gen(), rng.gen(), rng.gen()],
                c_curve,
                depth_key: i as f64,
            }
        })
        .collect();
    let scene = Scene {
        m,
        background: [rng.gen(), rng.gen(), rng.gen()],
        splats: Splats::Flat(splats),
    };
    let target = Image::from_fn(W, H, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
    (scene, target)
}

pub fn forward(scene: &Scene) -> RenderTape {
    let params = RasterParams::default();
    let p = prepare(scene, None, W, H, &params).unwrap();
    render(&p, W, H, scene.background, &params)
}

/// Contributor identity and curve masks at every pixel, plus the sign of
/// every residual: if these agree the loss is smooth between two scenes.
pub fn structure(scene: &Scene, target: &Image) -> (Vec<(usize, u32, u32)>, Vec<i8>) {
    let tape = forward(scene);
    let mut recs = Vec::new();
    for y in 0..H {
        for x in 0..W {
            for r in tape.records(x, y) {
                recs.push((y * W + x, r.splat, r.mask));
            }
        }
    }
    let signs = tape
        .image
        .pixels
        .iter()
        .zip(&target.pixels)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).partial_cmp(&0.0).map_or(0, |o| o as i8)))
        .collect();
    (recs, signs)
}

pub fn l1_loss(scene: &Scene, target: &Image) -> f64 {
    l1(&forward(scene).image, target).unwrap().0
}

/// Reads or writes one continuous parameter of splat `i` by name.
pub fn param(scene: &mut Scene, i: usize, which: usize) -> &mut f64 {
    let s = &mut scene.flat_mut().unwrap()[i];
    match which {
        0 => &mut s.center.x,
        1 => &mut s.center.y,
        2 => &mut s.theta,
        3 => &mut s.log_scales[0],
        4 => &mut s.log_scales[1],
        5 => &mut s.raw_opacity,
        6 => &mut s.color[0],
        7 => &mut s.color[1],
        _ => &mut s.color[2],
    }
}

pub const PARAM_NAMES: [&str; 9] = [
    "center.x", "center.y", "theta", "log_scale.0", "log_scale.1", "raw_opacity", "color.r", "color.g", "color.b",
];

/// Central difference of the L1 loss, or `None` when the perturbation
/// changes the contributor structure, a curve mask or a residual sign.
pub fn stable_central_diff(scene: &Scene, target: &Image, i: usize, which: usize, h: f64) -> Option<f64> {
    let base = structure(scene, target);
    let mut plus = scene.clone();
    *param(&mut plus, i, which) += h;
    let mut minus = scene.clone();
    *param(&mut minus, i, which) -= h;
    if structure(&plus, target) != base || structure(&minus, target) != base {
        return None;
    }
    Some((l1_loss(&plus, target) - l1_loss(&minus, target)) / (2.0 * h))
}
