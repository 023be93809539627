//! Flat parameter layout and the Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::grad::SplatGrad;
use crate::math::Vec2;
use crate::scene::FlatSplat;

/// Parameter groups, each with its own learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Center,
    Theta,
    LogScales,
    RawOpacity,
    Color,
    Curve,
}

pub const GROUPS: [Group; 6] = [
    Group::Center,
    Group::Theta,
    Group::LogScales,
    Group::RawOpacity,
    Group::Color,
    Group::Curve,
];

/// Values per splat: center 2, θ 1, log scales 2, opacity 1, color 3, then
/// `8M` curve coordinates.
pub fn stride(m: usize) -> usize {
    9 + 8 * m
}

pub fn group_of(offset: usize) -> Group {
    match offset {
        0 | 1 => Group::Center,
        2 => Group::Theta,
        3 | 4 => Group::LogScales,
        5 => Group::RawOpacity,
        6..=8 => Group::Color,
        _ => Group::Curve,
    }
}

pub fn pack_splat(s: &FlatSplat, out: &mut Vec<f64>) {
    out.extend_from_slice(&[s.center.x, s.center.y, s.theta]);
    out.extend_from_slice(&s.log_scales);
    out.push(s.raw_opacity);
    out.extend_from_slice(&s.color);
    for c in &s.c_curve {
        out.extend_from_slice(&[c.x, c.y]);
    }
}

pub fn pack(splats: &[FlatSplat]) -> Vec<f64> {
    let mut out = Vec::new();
    for s in splats {
        pack_splat(s, &mut out);
    }
    out
}

pub fn unpack(params: &[f64], splats: &mut [FlatSplat]) {
    let Some(first) = splats.first() else { return };
    let p = stride(first.c_curve.len() / 4);
    assert_eq!(params.len(), p * splats.len(), "parameter vector does not match the scene");
    for (s, v) in splats.iter_mut().zip(params.chunks_exact(p)) {
        s.center = Vec2::new(v[0], v[1]);
        s.theta = v[2];
        s.log_scales = [v[3], v[4]];
        s.raw_opacity = v[5];
        s.color = [v[6], v[7], v[8]];
        for (c, xy) in s.c_curve.iter_mut().zip(v[9..].chunks_exact(2)) {
            *c = Vec2::new(xy[0], xy[1]);
        }
    }
}

pub fn pack_grads(grads: &[SplatGrad]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(&[g.d_center.x, g.d_center.y, g.d_theta]);
        out.extend_from_slice(&g.d_log_scales);
        out.push(g.d_raw_opacity);
        out.extend_from_slice(&g.d_color);
        for c in &g.d_c_curve {
            out.extend_from_slice(&[c.x, c.y]);
        }
    }
    out
}

/// Adam with bias correction. Moments are laid out like the packed
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One update. `lr[i]` of 0 leaves parameter `i` and its moments alone.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: impl Fn(usize) -> f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let rate = lr(i);
            if rate == 0.0 {
                continue;
            }
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// Keeps the rows (of `stride` values) whose flag is set.
    pub fn retain_rows(&mut self, stride: usize, keep: &[bool]) {
        for buf in [&mut self.m, &mut self.v] {
            let mut out = Vec::with_capacity(buf.len());
            for (row, &k) in buf.chunks_exact(stride).zip(keep) {
                if k {
                    out.extend_from_slice(row);
                }
            }
            *buf = out;
        }
    }

    /// Appends `rows` zeroed rows.
    pub fn push_zero_rows(&mut self, stride: usize, rows: usize) {
        self.m.resize(self.m.len() + stride * rows, 0.0);
        self.v.resize(self.v.len() + stride * rows, 0.0);
    }
}
