//! Pinhole projection of world-space Gaussians and curve control points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mat3_mul, mat3_transpose, Mat3, Sym2, Vec2};
use crate::scene::SpatialSplat;

/// World-to-camera transform plus pinhole intrinsics. Camera space looks down
/// `+z`; image `x` grows right and `y` grows down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    /// Row-major 4x4 `W`.
    pub view: [f64; 16],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
}

impl Camera {
    /// Identity view looking down `+z` with the principal point at the image
    /// center.
    pub fn looking_down_z(width: usize, height: usize, focal: f64) -> Self {
        let mut view = [0.0; 16];
        for i in 0..4 {
            view[5 * i] = 1.0;
        }
        Self {
            view,
            fx: focal,
            fy: focal,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            near: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.near > 0.0) {
            return Err(Error::Input("camera needs fx, fy, near > 0".into()));
        }
        if !self.view.iter().all(|v| v.is_finite()) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::Input("camera values must be finite".into()));
        }
        let r = self.rotation();
        let rrt = mat3_mul(&r, &mat3_transpose(&r));
        for (i, row) in rrt.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (v - want).abs() > 1e-9 {
                    return Err(Error::Input("camera view is not a rigid transform".into()));
                }
            }
        }
        let last = &self.view[12..];
        if last != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Input("camera view must have last row 0 0 0 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Camera> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let cam: Camera =
            serde_json::from_str(&text).map_err(|e| Error::Input(format!("camera: {e}")))?;
        cam.validate()?;
        Ok(cam)
    }

    /// Rotation block of `W`.
    pub fn rotation(&self) -> Mat3 {
        let v = &self.view;
        [[v[0], v[1], v[2]], [v[4], v[5], v[6]], [v[8], v[9], v[10]]]
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let v = &self.view;
        std::array::from_fn(|i| v[4 * i] * p[0] + v[4 * i + 1] * p[1] + v[4 * i + 2] * p[2] + v[4 * i + 3])
    }

    /// Perspective image position of a camera-space point.
    #[inline]
    pub fn image_of(&self, pc: [f64; 3]) -> Vec2 {
        Vec2::new(
            self.fx * pc[0] / pc[2] + self.cx,
            self.fy * pc[1] / pc[2] + self.cy,
        )
    }

    /// Affine Jacobian of [`Camera::image_of`] at a camera-space point.
    pub fn jacobian(&self, pc: [f64; 3]) -> [[f64; 3]; 2] {
        let [x, y, z] = pc;
        let iz = 1.0 / z;
        [
            [self.fx * iz, 0.0, -self.fx * x * iz * iz],
            [0.0, self.fy * iz, -self.fy * y * iz * iz],
        ]
    }

    /// Image position of a world point, `None` at or behind the near plane.
    pub fn project_point(&self, p: [f64; 3]) -> Option<Vec2> {
        let pc = self.to_camera(p);
        (pc[2] > self.near).then(|| self.image_of(pc))
    }
}

/// Image-plane footprint of a world-space Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    pub mu: Vec2,
    pub cov: Sym2,
    pub depth: f64,
}

/// Center by exact perspective, covariance through the affine Jacobian at the
/// center. `None` when the center is not in front of the near plane.
pub fn project_gaussian<C>(splat: &SpatialSplat<C>, cam: &Camera) -> Option<ProjectedGaussian> {
    let pc = cam.to_camera(splat.center);
    if pc[2] <= cam.near {
        return None;
    }
    let w = cam.rotation();
    let sigma_cam = mat3_mul(&mat3_mul(&w, &splat.covariance()), &mat3_transpose(&w));
    let j = cam.jacobian(pc);
    let mut cov = [[0.0; 2]; 2];
    for (a, row) in cov.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            for k in 0..3 {
                for l in 0..3 {
                    *v += j[a][k] * sigma_cam[k][l] * j[b][l];
                }
            }
        }
    }
    Some(ProjectedGaussian {
        mu: cam.image_of(pc),
        cov: Sym2::new(cov[0][0], 0.5 * (cov[0][1] + cov[1][0]), cov[1][1]),
        depth: pc[2],
    })
}

/// World positions of local curve offsets along the first two rotation
/// columns.
pub fn lift_control_points(splat: &SpatialSplat<Vec2>) -> Vec<[f64; 3]> {
    let r = splat.rotation();
    let mu = splat.center;
    splat
        .curve
        .iter()
        .map(|c| std::array::from_fn(|i| mu[i] + c.x * r[i][0] + c.y * r[i][1]))
        .collect()
}

/// Perspective projection of every point; `None` if any point is not in
/// front of the near plane.
pub fn project_control_points(points: &[[f64; 3]], cam: &Camera) -> Option<Vec<Vec2>> {
    points.iter().map(|&p| cam.project_point(p)).collect()
}
