use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterParams, MAX_CURVES};

/// Every constant of a fit. Missing fields in a config file take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub iters: usize,
    pub splats: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub lr_center: f64,
    pub lr_theta: f64,
    pub lr_log_scales: f64,
    pub lr_raw_opacity: f64,
    pub lr_color: f64,
    pub lr_c_curve: f64,
    /// Multiplies `lr_center` and `lr_c_curve`, which are quoted per unit of
    /// scene extent. Defaults to the larger image side.
    pub spatial_lr_scale: Option<f64>,
    pub lambda_ssim: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// 0 disables densification.
    pub densify_interval: usize,
    /// Mean center-gradient norm (per iteration since the last densify) above
    /// which a splat is cloned.
    pub densify_grad_threshold: f64,
    /// Splats with opacity below this are pruned at densification.
    pub prune_alpha: f64,
    /// Densification never grows the scene beyond this.
    pub max_splats: usize,
    /// Keep every curve in its initial state and skip curve gradients.
    pub freeze_curves: bool,
    pub min_alpha: f64,
    pub min_transmittance: f64,
    /// 0 records only the final checkpoint.
    pub checkpoint_interval: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iters: 2000,
            splats: 64,
            m: 3,
            seed: 0,
            lr_center: 2e-3,
            lr_theta: 1e-3,
            lr_log_scales: 5e-3,
            lr_raw_opacity: 5e-2,
            lr_color: 2.5e-3,
            lr_c_curve: 2e-4,
            spatial_lr_scale: None,
            lambda_ssim: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-15,
            densify_interval: 300,
            densify_grad_threshold: 2e-4,
            prune_alpha: 0.005,
            max_splats: 4096,
            freeze_curves: false,
            min_alpha: 1.0 / 255.0,
            min_transmittance: 1e-4,
            checkpoint_interval: 100,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let lrs = [
            ("lr_center", self.lr_center),
            ("lr_theta", self.lr_theta),
            ("lr_log_scales", self.lr_log_scales),
            ("lr_raw_opacity", self.lr_raw_opacity),
            ("lr_color", self.lr_color),
            ("lr_c_curve", self.lr_c_curve),
        ];
        for (name, v) in lrs {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda_ssim) {
            return Err(Error::Config(format!("lambda_ssim must lie in [0, 1], got {}", self.lambda_ssim)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        if self.splats == 0 || self.m == 0 || self.m > MAX_CURVES {
            return Err(Error::Config(format!(
                "need splats >= 1 and 1 <= M <= {MAX_CURVES}, got {} and {}",
                self.splats, self.m
            )));
        }
        if let Some(s) = self.spatial_lr_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("spatial_lr_scale must be positive".into()));
            }
        }
        if !(self.min_alpha > 0.0 && self.min_alpha < 1.0) || !(self.min_transmittance >= 0.0 && self.min_transmittance < 1.0) {
            return Err(Error::Config("raster thresholds must lie in (0, 1)".into()));
        }
        if !(self.densify_grad_threshold >= 0.0) || !(0.0..1.0).contains(&self.prune_alpha) {
            return Err(Error::Config("densify thresholds out of range".into()));
        }
        Ok(())
    }

    pub fn raster(&self) -> RasterParams {
        RasterParams {
            min_alpha: self.min_alpha,
            min_transmittance: self.min_transmittance,
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<FitConfig> {
        let cfg: FitConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unreadable files are input errors; unparsable or invalid ones are
    /// config errors.
    pub fn load(path: &Path) -> Result<FitConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        FitConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
