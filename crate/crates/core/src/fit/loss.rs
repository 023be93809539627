//! Photometric loss, its gradient, and image quality metrics.
//!
//! SSIM uses an 11x11 Gaussian window (σ = 1.5) evaluated only where the
//! window fits inside the image, averaged over window positions and channels.

use crate::error::{Error, Result};
use crate::io::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = K1 * K1;
const C2: f64 = K2 * K2;

/// PSNR reported for (near) identical images.
pub const PSNR_CAP: f64 = 99.0;

fn window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Channel-averaged mean absolute error and its gradient with respect to
/// `render`.
pub fn l1(render: &Image, target: &Image) -> Result<(f64, Image)> {
    render.same_shape(target)?;
    let n = (render.pixels.len() * 3) as f64;
    let mut grad = Image::new(render.width, render.height, [0.0; 3]);
    let mut sum = 0.0;
    for ((r, t), g) in render.pixels.iter().zip(&target.pixels).zip(&mut grad.pixels) {
        for c in 0..3 {
            let d = r[c] - t[c];
            sum += d.abs();
            g[c] = if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            };
        }
    }
    Ok((sum / n, grad))
}

/// Single-channel plane of size `w x h`.
struct Plane<'a> {
    w: usize,
    h: usize,
    data: &'a [f64],
}

/// Separable valid-mode correlation with the window.
fn blur_valid(p: &Plane, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (p.w - SSIM_WINDOW + 1, p.h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * p.h];
    for y in 0..p.h {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * p.data[y * p.w + x + i];
            }
            rows[y * ow + x] = s;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Adjoint of [`blur_valid`]: spreads a `(w-10) x (h-10)` map back to `w x h`.
fn blur_valid_adjoint(m: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..oh {
        for x in 0..ow {
            let v = m[y * ow + x];
            for (i, kv) in k.iter().enumerate() {
                rows[(y + i) * ow + x] += kv * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = rows[y * ow + x];
            for (i, kv) in k.iter().enumerate() {
                out[y * w + x + i] += kv * v;
            }
        }
    }
    out
}

fn channel(img: &Image, c: usize) -> Vec<f64> {
    img.pixels.iter().map(|p| p[c]).collect()
}

/// Mean SSIM of one channel and, optionally, its gradient with respect to `x`.
fn ssim_channel(x: &[f64], y: &[f64], w: usize, h: usize, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let k = window();
    let plane = |d: &[f64]| blur_valid(&Plane { w, h, data: d }, &k);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, my, exx, eyy, exy) = (plane(x), plane(y), plane(&xx), plane(&yy), plane(&xy));
    let count = mx.len() as f64;

    let mut total = 0.0;
    let n = mx.len();
    let (mut ga, mut gb, mut gc) = if want_grad {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let vx = exx[i] - ux * ux;
        let vy = eyy[i] - uy * uy;
        let cxy = exy[i] - ux * uy;
        let n1 = 2.0 * ux * uy + C1;
        let n2 = 2.0 * cxy + C2;
        let d1 = ux * ux + uy * uy + C1;
        let d2 = vx + vy + C2;
        let s = n1 * n2 / (d1 * d2);
        total += s;
        if want_grad {
            let ds_dux = 2.0 * uy * n2 / (d1 * d2) - s * 2.0 * ux / d1;
            let ds_dvx = -s / d2;
            let ds_dcxy = 2.0 * n1 / (d1 * d2);
            // ∂s/∂x_p = Σ_i w(p-i) [ds_dux + ds_dvx·2(x_p - ux) + ds_dcxy·(y_p - uy)]
            ga[i] = (ds_dux - 2.0 * ds_dvx * ux - ds_dcxy * uy) / count;
            gb[i] = 2.0 * ds_dvx / count;
            gc[i] = ds_dcxy / count;
        }
    }
    let grad = want_grad.then(|| {
        let a = blur_valid_adjoint(&ga, w, h, &k);
        let b = blur_valid_adjoint(&gb, w, h, &k);
        let c = blur_valid_adjoint(&gc, w, h, &k);
        (0..w * h).map(|p| a[p] + b[p] * x[p] + c[p] * y[p]).collect()
    });
    (total / count, grad)
}

fn check_ssim_size(img: &Image) -> Result<()> {
    if img.width < SSIM_WINDOW || img.height < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            img.width, img.height
        )));
    }
    Ok(())
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    check_ssim_size(a)?;
    let total: f64 = (0..3)
        .map(|c| ssim_channel(&channel(a, c), &channel(b, c), a.width, a.height, false).0)
        .sum();
    Ok(total / 3.0)
}

/// SSIM and its gradient with respect to `render`.
pub fn ssim_with_grad(render: &Image, target: &Image) -> Result<(f64, Image)> {
    render.same_shape(target)?;
    check_ssim_size(render)?;
    let mut grad = Image::new(render.width, render.height, [0.0; 3]);
    let mut total = 0.0;
    for c in 0..3 {
        let (v, g) = ssim_channel(&channel(render, c), &channel(target, c), render.width, render.height, true);
        total += v;
        for (p, gv) in grad.pixels.iter_mut().zip(g.expect("gradient requested")) {
            p[c] = gv / 3.0;
        }
    }
    Ok((total / 3.0, grad))
}

/// `(1 - λ) L1 + λ (1 - SSIM)` and its gradient with respect to `render`.
pub fn loss(render: &Image, target: &Image, lambda_ssim: f64) -> Result<(f64, Image)> {
    let (l, mut grad) = l1(render, target)?;
    let mut value = (1.0 - lambda_ssim) * l;
    for p in grad.pixels.iter_mut() {
        for v in p.iter_mut() {
            *v *= 1.0 - lambda_ssim;
        }
    }
    if lambda_ssim > 0.0 {
        let (s, sg) = ssim_with_grad(render, target)?;
        value += lambda_ssim * (1.0 - s);
        for (p, q) in grad.pixels.iter_mut().zip(&sg.pixels) {
            for c in 0..3 {
                p[c] -= lambda_ssim * q[c];
            }
        }
    }
    Ok((value, grad))
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
        .sum();
    Ok(sum / (3 * a.pixels.len()) as f64)
}

/// `10 log10(1 / MSE)`, capped for MSE below `1e-10`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < 1e-10 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// `(PSNR, SSIM)`.
pub fn metrics(render: &Image, target: &Image) -> Result<(f64, f64)> {
    Ok((psnr(render, target)?, ssim(render, target)?))
}
