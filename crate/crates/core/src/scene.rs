//! Splat parameterization and the scene container.
//!
//! Raw parameters are unconstrained: scales are stored as logarithms and
//! opacity as a logit, so every parameter vector describes a valid Gaussian.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Image;
use crate::math::{quat_to_mat3, rotation2, sigmoid, Mat3, Sym2, Vec2};
use crate::raster::COV_REGULARIZATION;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Flat2d,
    Projected3d,
    Projected3dCurve3d,
}

/// An image-plane Gaussian with `M` scissor curves in its local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSplat {
    pub center: Vec2,
    pub theta: f64,
    pub log_scales: [f64; 2],
    pub raw_opacity: f64,
    pub color: [f64; 3],
    /// `4M` offsets along the rotation columns `r1`, `r2`, in pixels.
    pub c_curve: Vec<Vec2>,
    pub depth_key: f64,
}

impl FlatSplat {
    pub fn scales(&self) -> [f64; 2] {
        self.log_scales.map(f64::exp)
    }

    pub fn alpha(&self) -> f64 {
        sigmoid(self.raw_opacity)
    }

    /// `R(θ) diag(s1², s2²) R(θ)ᵀ`
    pub fn covariance(&self) -> Sym2 {
        covariance_2x2(self.theta, self.scales())
    }

    /// Control points in image coordinates.
    pub fn curve_points(&self) -> Vec<Vec2> {
        let [r1, r2] = rotation2(self.theta);
        self.c_curve
            .iter()
            .map(|c| self.center + r1 * c.x + r2 * c.y)
            .collect()
    }
}

pub fn covariance_2x2(theta: f64, scales: [f64; 2]) -> Sym2 {
    let (s, c) = theta.sin_cos();
    let (a, b) = (scales[0] * scales[0], scales[1] * scales[1]);
    Sym2::new(
        c * c * a + s * s * b,
        c * s * (a - b),
        s * s * a + c * c * b,
    )
}

/// A world-space Gaussian. `C` is the curve attribute: local 2D offsets
/// lifted through the rotation (`Vec2`) or free world points (`[f64; 3]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSplat<C> {
    pub center: [f64; 3],
    /// `[w, x, y, z]`, normalized on use.
    pub quat: [f64; 4],
    pub log_scales: [f64; 3],
    pub raw_opacity: f64,
    pub color: [f64; 3],
    pub curve: Vec<C>,
    pub depth_key: f64,
}

impl<C> SpatialSplat<C> {
    pub fn rotation(&self) -> Mat3 {
        quat_to_mat3(self.quat)
    }

    pub fn alpha(&self) -> f64 {
        sigmoid(self.raw_opacity)
    }

    /// `R S Sᵀ Rᵀ`
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation();
        let s2 = self.log_scales.map(|l| (2.0 * l).exp());
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| r[i][k] * s2[k] * r[j][k]).sum();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Splats {
    Flat(Vec<FlatSplat>),
    Projected(Vec<SpatialSplat<Vec2>>),
    ProjectedCurve3d(Vec<SpatialSplat<[f64; 3]>>),
}

impl Splats {
    pub fn len(&self) -> usize {
        match self {
            Splats::Flat(v) => v.len(),
            Splats::Projected(v) => v.len(),
            Splats::ProjectedCurve3d(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Curves per splat.
    pub m: usize,
    pub background: [f64; 3],
    pub splats: Splats,
}

impl Scene {
    pub fn empty_flat(m: usize, background: [f64; 3]) -> Self {
        Self {
            m,
            background,
            splats: Splats::Flat(Vec::new()),
        }
    }

    pub fn mode(&self) -> Mode {
        match self.splats {
            Splats::Flat(_) => Mode::Flat2d,
            Splats::Projected(_) => Mode::Projected3d,
            Splats::ProjectedCurve3d(_) => Mode::Projected3dCurve3d,
        }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn flat(&self) -> Result<&[FlatSplat]> {
        match &self.splats {
            Splats::Flat(v) => Ok(v),
            _ => Err(Error::Mode(format!("{:?} scene where flat2d is required", self.mode()))),
        }
    }

    pub fn flat_mut(&mut self) -> Result<&mut Vec<FlatSplat>> {
        let mode = self.mode();
        match &mut self.splats {
            Splats::Flat(v) => Ok(v),
            _ => Err(Error::Mode(format!("{mode:?} scene where flat2d is required"))),
        }
    }

    /// Checks the container invariants: one `M` for all splats, finite
    /// parameters, unique depth keys in flat mode.
    pub fn validate(&self) -> Result<()> {
        let rows = 4 * self.m;
        let bad = |i: usize, what: &str| Err(Error::Input(format!("splat {i}: {what}")));
        if self.m == 0 && !self.is_empty() {
            return Err(Error::Input("M must be at least 1".into()));
        }
        if !self.background.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("background must be finite".into()));
        }
        match &self.splats {
            Splats::Flat(v) => {
                let mut keys = Vec::with_capacity(v.len());
                for (i, s) in v.iter().enumerate() {
                    if s.c_curve.len() != rows {
                        return bad(i, &format!("{} curve rows, expected {rows}", s.c_curve.len()));
                    }
                    let finite = s.center.is_finite()
                        && s.theta.is_finite()
                        && s.log_scales.iter().chain(&s.color).all(|x| x.is_finite())
                        && s.raw_opacity.is_finite()
                        && s.depth_key.is_finite()
                        && s.c_curve.iter().all(|c| c.is_finite());
                    if !finite {
                        return bad(i, "non-finite parameter");
                    }
                    keys.push(s.depth_key);
                }
                keys.sort_by(f64::total_cmp);
                if keys.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Input("depth_key values must be unique".into()));
                }
            }
            Splats::Projected(v) => {
                for (i, s) in v.iter().enumerate() {
                    if s.curve.len() != rows {
                        return bad(i, &format!("{} curve rows, expected {rows}", s.curve.len()));
                    }
                    if !spatial_finite(s) || !s.curve.iter().all(|c| c.is_finite()) {
                        return bad(i, "non-finite parameter");
                    }
                }
            }
            Splats::ProjectedCurve3d(v) => {
                for (i, s) in v.iter().enumerate() {
                    if s.curve.len() != rows {
                        return bad(i, &format!("{} curve rows, expected {rows}", s.curve.len()));
                    }
                    if !spatial_finite(s) || !s.curve.iter().flatten().all(|c| c.is_finite()) {
                        return bad(i, "non-finite parameter");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile::from(self);
        let mut s = serde_json::to_string_pretty(&file).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let file: SceneFile =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("scene: {e}")))?;
        let scene = file.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Scene::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn spatial_finite<C>(s: &SpatialSplat<C>) -> bool {
    s.center
        .iter()
        .chain(&s.quat)
        .chain(&s.log_scales)
        .chain(&s.color)
        .all(|x| x.is_finite())
        && s.raw_opacity.is_finite()
        && s.depth_key.is_finite()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    format_version: u32,
    mode: Mode,
    #[serde(rename = "M")]
    m: usize,
    background: [f64; 3],
    splats: Vec<SplatFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplatFile {
    center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quat: Option<[f64; 4]>,
    log_scales: Vec<f64>,
    raw_opacity: f64,
    color: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_curve: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c3d_curve: Option<Vec<[f64; 3]>>,
    depth_key: f64,
}

impl From<&Scene> for SceneFile {
    fn from(scene: &Scene) -> Self {
        let splats = match &scene.splats {
            Splats::Flat(v) => v
                .iter()
                .map(|s| SplatFile {
                    center: vec![s.center.x, s.center.y],
                    theta: Some(s.theta),
                    quat: None,
                    log_scales: s.log_scales.to_vec(),
                    raw_opacity: s.raw_opacity,
                    color: s.color,
                    c_curve: Some(s.c_curve.iter().map(|&c| c.into()).collect()),
                    c3d_curve: None,
                    depth_key: s.depth_key,
                })
                .collect(),
            Splats::Projected(v) => v
                .iter()
                .map(|s| SplatFile {
                    c_curve: Some(s.curve.iter().map(|&c| c.into()).collect()),
                    ..spatial_file(s)
                })
                .collect(),
            Splats::ProjectedCurve3d(v) => v
                .iter()
                .map(|s| SplatFile {
                    c3d_curve: Some(s.curve.clone()),
                    ..spatial_file(s)
                })
                .collect(),
        };
        SceneFile {
            format_version: FORMAT_VERSION,
            mode: scene.mode(),
            m: scene.m,
            background: scene.background,
            splats,
        }
    }
}

fn spatial_file<C>(s: &SpatialSplat<C>) -> SplatFile {
    SplatFile {
        center: s.center.to_vec(),
        theta: None,
        quat: Some(s.quat),
        log_scales: s.log_scales.to_vec(),
        raw_opacity: s.raw_opacity,
        color: s.color,
        c_curve: None,
        c3d_curve: None,
        depth_key: s.depth_key,
    }
}

impl SceneFile {
    fn into_scene(self) -> Result<Scene> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let err = |i: usize, what: &str| Error::Input(format!("splat {i}: {what}"));
        let splats = match self.mode {
            Mode::Flat2d => Splats::Flat(
                self.splats
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let center: [f64; 2] = s
                            .center
                            .try_into()
                            .map_err(|_| err(i, "center needs 2 numbers"))?;
                        let log_scales: [f64; 2] = s
                            .log_scales
                            .try_into()
                            .map_err(|_| err(i, "log_scales needs 2 numbers"))?;
                        Ok(FlatSplat {
                            center: center.into(),
                            theta: s.theta.ok_or_else(|| err(i, "missing theta"))?,
                            log_scales,
                            raw_opacity: s.raw_opacity,
                            color: s.color,
                            c_curve: s
                                .c_curve
                                .ok_or_else(|| err(i, "missing c_curve"))?
                                .into_iter()
                                .map(Vec2::from)
                                .collect(),
                            depth_key: s.depth_key,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            Mode::Projected3d => Splats::Projected(
                self.splats
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut s)| {
                        let curve = s
                            .c_curve
                            .take()
                            .ok_or_else(|| err(i, "missing c_curve"))?
                            .into_iter()
                            .map(Vec2::from)
                            .collect();
                        spatial_from_file(i, s, curve)
                    })
                    .collect::<Result<_>>()?,
            ),
            Mode::Projected3dCurve3d => Splats::ProjectedCurve3d(
                self.splats
                    .into_iter()
                    .enumerate()
                    .map(|(i, mut s)| {
                        let curve = s
                            .c3d_curve
                            .take()
                            .ok_or_else(|| err(i, "missing c3d_curve"))?;
                        spatial_from_file(i, s, curve)
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Scene {
            m: self.m,
            background: self.background,
            splats,
        })
    }
}

fn spatial_from_file<C>(i: usize, s: SplatFile, curve: Vec<C>) -> Result<SpatialSplat<C>> {
    let err = |what: &str| Error::Input(format!("splat {i}: {what}"));
    if s.theta.is_some() || s.c_curve.is_some() || s.c3d_curve.is_some() {
        return Err(err("fields from another mode"));
    }
    Ok(SpatialSplat {
        center: s.center.try_into().map_err(|_| err("center needs 3 numbers"))?,
        quat: s.quat.ok_or_else(|| err("missing quat"))?,
        log_scales: s
            .log_scales
            .try_into()
            .map_err(|_| err("log_scales needs 3 numbers"))?,
        raw_opacity: s.raw_opacity,
        color: s.color,
        curve,
        depth_key: s.depth_key,
    })
}

/// Local control points of `m` arcs that stay clear of the Gaussian support.
///
/// Curve `k` faces the direction `u` at angle `2πk/m`: its ends sit at
/// `d·u ∓ d·v` and both inner control points at `(d + 2d/15)·u`, which bows
/// the midpoint out to `1.1d`. Here `d = 4σ` with `σ` the largest standard
/// deviation after the rasterizer's covariance regularization. Travelling the
/// arc keeps the origin on the left, so the indicator is 1 at and around the
/// center.
///
/// The inner points are deliberately not those of a degree-elevated
/// quadratic. The indicator follows the whole algebraic curve, arms
/// included. A quadratic's arms fold back past the center, and any
/// perturbation of a cubic with no cubic term swings one of them through the
/// splat. Here the cubic term is `2d·v`, so the arms run off along `±v` and
/// reach the center line only about `12d` away.
pub fn non_cutting_arcs(scales: [f64; 2], m: usize) -> Vec<Vec2> {
    let s = scales[0].max(scales[1]);
    let d = 4.0 * (s * s + COV_REGULARIZATION).sqrt();
    let mut out = Vec::with_capacity(4 * m);
    for k in 0..m {
        let angle = 2.0 * PI * k as f64 / m as f64;
        let u = Vec2::new(angle.cos(), angle.sin());
        let v = u.perp();
        let inner = u * (d + 2.0 * d / 15.0);
        out.extend([u * d - v * d, inner, inner, u * d + v * d]);
    }
    out
}

/// A flat scene of `n` splats on a jittered grid, each with `m` non-cutting
/// curves. Colors come from `target` at the splat center when given.
pub fn init_scene(
    width: usize,
    height: usize,
    n: usize,
    m: usize,
    seed: u64,
    target: Option<&Image>,
) -> Result<Scene> {
    if n == 0 || m == 0 {
        return Err(Error::Config(format!("need at least one splat and curve, got n={n} m={m}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Shape("image must be non-empty".into()));
    }
    if let Some(t) = target {
        if t.width != width || t.height != height {
            return Err(Error::Shape("target size differs from scene size".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let cols = ((n as f64 * w / h).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (w / cols as f64, h / rows as f64);
    let scale = 0.5 * (w * h / n as f64).sqrt();

    let splats = (0..n)
        .map(|i| {
            let jx: f64 = rng.gen_range(-0.25..0.25);
            let jy: f64 = rng.gen_range(-0.25..0.25);
            let theta: f64 = rng.gen_range(0.0..PI);
            let center = Vec2::new(
                ((i % cols) as f64 + 0.5 + jx) * cw,
                ((i / cols) as f64 + 0.5 + jy) * ch,
            );
            let color = match target {
                Some(t) => {
                    let x = (center.x.floor() as usize).min(width - 1);
                    let y = (center.y.floor() as usize).min(height - 1);
                    t.get(x, y)
                }
                None => [0.5; 3],
            };
            FlatSplat {
                center,
                theta,
                log_scales: [scale.ln(); 2],
                raw_opacity: 0.0,
                color,
                c_curve: non_cutting_arcs([scale; 2], m),
                depth_key: i as f64,
            }
        })
        .collect();
    Ok(Scene {
        m,
        background: [0.0; 3],
        splats: Splats::Flat(splats),
    })
}
