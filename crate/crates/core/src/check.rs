//! Self-checks behind the `grad-check`, `implicit-check` and `solver-check`
//! commands. Each one compares the library against a brute-force oracle and
//! returns a table of rows with a pass flag.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bezier::{implicitize, solve_cubic_real, CubicBezier};
use crate::fit::loss::l1;
use crate::grad::{backward, BackwardOptions, SplatGrad};
use crate::io::Image;
use crate::math::Vec2;
use crate::raster::{prepare, render, RasterParams, RenderTape};
use crate::scene::{non_cutting_arcs, FlatSplat, Scene, Splats};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub cases: usize,
    /// Largest error seen, in the unit of the check.
    pub worst: f64,
    pub failures: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub title: String,
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        writeln!(f, "{:<16} {:>8} {:>12} {:>9}  result", "group", "cases", "worst", "failures")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:>8} {:>12.3e} {:>9}  {}",
                r.name,
                r.cases,
                r.worst,
                r.failures,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

fn row(name: &str, cases: usize, worst: f64, failures: usize) -> CheckRow {
    CheckRow {
        name: name.into(),
        cases,
        worst,
        failures,
        pass: failures == 0,
    }
}

// ---------------------------------------------------------------- implicit

fn bernstein_point(p: &[Vec2; 4], t: f64) -> Vec2 {
    let s = 1.0 - t;
    p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
}

/// Implicit residual along `samples` points of each of `curves` random curves
/// per family. Passes when every residual is at most `tol`.
pub fn implicit_check(curves: usize, samples: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    type Family = fn(&mut ChaCha8Rng) -> [Vec2; 4];
    let families: [(&str, Family); 4] = [
        ("random", |r| std::array::from_fn(|_| Vec2::new(r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0)))),
        ("small", |r| std::array::from_fn(|_| Vec2::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))),
        ("far", |r| {
            let o = Vec2::new(r.gen_range(-1e4..1e4), r.gen_range(-1e4..1e4));
            std::array::from_fn(|_| o + Vec2::new(r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)))
        }),
        ("quadratic", |r| {
            let q: [Vec2; 3] = std::array::from_fn(|_| Vec2::new(r.gen_range(-30.0..30.0), r.gen_range(-30.0..30.0)));
            [
                q[0],
                q[0] * (1.0 / 3.0) + q[1] * (2.0 / 3.0),
                q[1] * (2.0 / 3.0) + q[2] * (1.0 / 3.0),
                q[2],
            ]
        }),
    ];
    let rows = families
        .iter()
        .map(|(name, gen)| {
            let mut worst = 0.0f64;
            let mut failures = 0;
            for _ in 0..curves {
                let p = gen(&mut rng);
                let r = match implicitize(&CubicBezier { points: p }) {
                    Ok(imp) => (0..samples)
                        .map(|k| k as f64 / (samples.max(2) - 1) as f64)
                        .map(|t| imp.eval(bernstein_point(&p, t)).abs())
                        .fold(0.0, f64::max),
                    Err(_) => f64::INFINITY,
                };
                worst = worst.max(r);
                if !(r <= tol) {
                    failures += 1;
                }
            }
            row(name, curves, worst, failures)
        })
        .collect();
    CheckReport {
        title: format!("implicit residual over {samples} samples per curve, tolerance {tol:e}"),
        rows,
    }
}

// ------------------------------------------------------------------ solver

fn poly(c: &[f64; 4], t: f64) -> f64 {
    c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

fn relative_residual(c: &[f64; 4], t: f64) -> f64 {
    let a = t.abs();
    let m = c[0].abs() + a * (c[1].abs() + a * (c[2].abs() + a * c[3].abs()));
    if m == 0.0 {
        0.0
    } else {
        poly(c, t).abs() / m
    }
}

/// Sign changes over a geometric grid on `[-1e6, 1e6]`, refined by bisection.
fn bisection_roots(c: &[f64; 4]) -> Vec<f64> {
    let mut grid = vec![0.0];
    for k in -560..=240 {
        let v = 10f64.powf(k as f64 / 40.0);
        grid.push(v);
        grid.push(-v);
    }
    grid.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut prev = (grid[0], poly(c, grid[0]));
    if prev.1 == 0.0 {
        out.push(prev.0);
    }
    for &t in &grid[1..] {
        let f = poly(c, t);
        if f == 0.0 {
            out.push(t);
        } else if prev.1 != 0.0 && (f > 0.0) != (prev.1 > 0.0) {
            let (mut lo, mut hi) = (prev.0, t);
            let flo = prev.1;
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
        prev = (t, f);
    }
    out
}

fn from_roots(r: [f64; 3], a: f64) -> [f64; 4] {
    [
        -a * r[0] * r[1] * r[2],
        a * (r[0] * r[1] + r[1] * r[2] + r[0] * r[2]),
        -a * (r[0] + r[1] + r[2]),
        a,
    ]
}

/// Runs `cases` coefficient sets per family through the solver. A root is
/// missed when the bisection oracle finds one with no solver root within
/// `tol` (relative to `max(1, |r|)`); a solver root is spurious when its
/// relative residual exceeds `tol`.
pub fn solver_check(cases: usize, seed: u64, tol: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    type Family = fn(&mut ChaCha8Rng) -> [f64; 4];
    let families: [(&str, Family); 5] = [
        ("uniform", |r| std::array::from_fn(|_| r.gen_range(-1.0..1.0))),
        ("three roots", |r| {
            from_roots(std::array::from_fn(|_| r.gen_range(-10.0..10.0)), r.gen_range(0.1..2.0))
        }),
        ("double root", |r| {
            let a = r.gen_range(-5.0..5.0);
            from_roots([a, a, r.gen_range(-5.0..5.0)], r.gen_range(0.1..2.0))
        }),
        ("tiny leading", |r| {
            let mut c: [f64; 4] = std::array::from_fn(|_| r.gen_range(-1.0..1.0));
            c[3] *= 1e-14;
            c
        }),
        ("quadratic", |r| {
            let mut c: [f64; 4] = std::array::from_fn(|_| r.gen_range(-1.0..1.0));
            c[3] = 0.0;
            c
        }),
    ];
    let rows = families
        .iter()
        .map(|(name, gen)| {
            let mut worst = 0.0f64;
            let mut failures = 0;
            for _ in 0..cases {
                let c = gen(&mut rng);
                let Ok(got) = solve_cubic_real(c[3], c[2], c[1], c[0]) else {
                    // identically zero polynomial: nothing to compare
                    continue;
                };
                let mut bad = false;
                for &s in got.as_slice() {
                    let e = relative_residual(&c, s);
                    worst = worst.max(e);
                    bad |= !(e <= tol);
                }
                for r in bisection_roots(&c) {
                    let e = got
                        .as_slice()
                        .iter()
                        .map(|s| (s - r).abs() / r.abs().max(1.0))
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max(e);
                    bad |= !(e <= tol);
                }
                failures += bad as usize;
            }
            row(name, cases, worst, failures)
        })
        .collect();
    CheckReport {
        title: format!("cubic solver against bisection, tolerance {tol:e}"),
        rows,
    }
}

// -------------------------------------------------------------------- grad

const SIZE: usize = 32;

/// Up to eight splats on a 32×32 canvas with a random target; half of the
/// splats have one curve pulled through their support.
pub fn random_check_scene(seed: u64) -> (Scene, Image) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=3);
    let splats = (0..n)
        .map(|i| {
            let scales = [rng.gen_range(1.5..6.0), rng.gen_range(1.5..6.0)];
            let mut c_curve = non_cutting_arcs(scales, m);
            if rng.gen_bool(0.5) {
                let k = rng.gen_range(0..m);
                let off = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                for p in &mut c_curve[4 * k..4 * k + 4] {
                    *p = *p * 0.2 + off;
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
    let target = Image::from_fn(SIZE, SIZE, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
    (scene, target)
}

fn forward(scene: &Scene) -> RenderTape {
    let params = RasterParams::default();
    let p = prepare(scene, None, SIZE, SIZE, &params).expect("flat scene");
    render(&p, SIZE, SIZE, scene.background, &params)
}

/// Contributors, masks and residual signs: fixed between two scenes exactly
/// when the L1 loss is smooth along the segment joining them.
fn structure(scene: &Scene, target: &Image) -> (Vec<(usize, u32, u32)>, Vec<i8>) {
    let tape = forward(scene);
    let mut recs = Vec::new();
    for y in 0..SIZE {
        for x in 0..SIZE {
            recs.extend(tape.records(x, y).iter().map(|r| (y * SIZE + x, r.splat, r.mask)));
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

fn param(scene: &mut Scene, i: usize, which: usize) -> &mut f64 {
    let s = &mut scene.flat_mut().expect("flat scene")[i];
    match which {
        0 => &mut s.center.x,
        1 => &mut s.center.y,
        2 => &mut s.theta,
        3 => &mut s.log_scales[0],
        4 => &mut s.log_scales[1],
        5 => &mut s.raw_opacity,
        k => &mut s.color[k - 6],
    }
}

fn pick(g: &SplatGrad, which: usize) -> f64 {
    match which {
        0 => g.d_center.x,
        1 => g.d_center.y,
        2 => g.d_theta,
        3 => g.d_log_scales[0],
        4 => g.d_log_scales[1],
        5 => g.d_raw_opacity,
        k => g.d_color[k - 6],
    }
}

/// Analytic gradients of the L1 loss against central differences with step
/// `h` on `scenes` random scenes starting at `seed`. Perturbations that
/// change the contributor structure, a curve mask or a residual sign are
/// skipped. Relative errors use a denominator floor of `1e-6`.
pub fn grad_check(seed: u64, scenes: usize, h: f64, tol: f64) -> CheckReport {
    const GROUPS: [(&str, &[usize]); 5] = [
        ("center", &[0, 1]),
        ("theta", &[2]),
        ("log_scales", &[3, 4]),
        ("raw_opacity", &[5]),
        ("color", &[6, 7, 8]),
    ];
    let mut acc = [(0usize, 0.0f64, 0usize); 5];
    for s in 0..scenes as u64 {
        let (scene, target) = random_check_scene(seed + s);
        let params = RasterParams::default();
        let p = prepare(&scene, None, SIZE, SIZE, &params).expect("flat scene");
        let tape = render(&p, SIZE, SIZE, scene.background, &params);
        let (_, d) = l1(&tape.image, &target).expect("same size");
        let grads = backward(&scene, &p, &tape, &d, &BackwardOptions::default())
            .expect("flat scene")
            .splats;
        let base = structure(&scene, &target);
        for i in 0..scene.len() {
            for (gi, (_, members)) in GROUPS.iter().enumerate() {
                for &which in *members {
                    let mut plus = scene.clone();
                    *param(&mut plus, i, which) += h;
                    let mut minus = scene.clone();
                    *param(&mut minus, i, which) -= h;
                    if structure(&plus, &target) != base || structure(&minus, &target) != base {
                        continue;
                    }
                    let loss = |s: &Scene| l1(&forward(s).image, &target).expect("same size").0;
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let a = pick(&grads[i], which);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                    let e = &mut acc[gi];
                    e.0 += 1;
                    e.1 = e.1.max(rel);
                    e.2 += !(rel <= tol) as usize;
                }
            }
        }
    }
    let rows = GROUPS
        .iter()
        .zip(acc)
        .map(|((name, _), (n, worst, failures))| CheckRow {
            name: (*name).into(),
            cases: n,
            worst,
            failures,
            pass: failures == 0 && n > 0,
        })
        .collect();
    CheckReport {
        title: format!("continuous gradients against central differences (h = {h:e}), relative tolerance {tol:e}"),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        assert!(implicit_check(20, 50, 1, 1e-6).pass());
        assert!(solver_check(200, 1, 1e-7).pass());
        let g = grad_check(0, 2, 1e-4, 1e-4);
        assert!(g.pass(), "{g}");
    }

    #[test]
    fn report_prints_one_line_per_row() {
        let r = solver_check(10, 3, 1e-7);
        let text = r.to_string();
        assert_eq!(text.lines().count(), r.rows.len() + 3);
        assert!(text.ends_with("PASS"));
    }
}
