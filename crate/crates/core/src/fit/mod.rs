//! Fitting a flat scene to a target image.

mod adam;
mod config;
pub mod loss;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::{group_of, pack, pack_grads, stride, unpack, Adam, Group, GROUPS};
pub use config::FitConfig;

use crate::error::{Error, Result};
use crate::grad::{backward, BackwardOptions, BackwardStats, GradientBuffer};
use crate::io::Image;
use crate::math::{sigmoid, Vec2};
use crate::raster::{prepare, render, ProjectedSplat, RenderTape};
use crate::scene::{init_scene, FlatSplat, Scene};

/// Renders a flat scene at the given size.
pub fn render_scene(scene: &Scene, width: usize, height: usize, cfg: &FitConfig) -> Result<RenderTape> {
    let params = cfg.raster();
    let prepared = prepare_fit(scene, width, height, cfg)?;
    Ok(render(&prepared, width, height, scene.background, &params))
}

/// Frozen curves keep the whole plane: their local offsets are fixed while
/// the scales move, so left alone they would start cutting large splats.
fn prepare_fit(scene: &Scene, width: usize, height: usize, cfg: &FitConfig) -> Result<Vec<ProjectedSplat>> {
    let mut prepared = prepare(scene, None, width, height, &cfg.raster())?;
    if cfg.freeze_curves {
        prepared.iter_mut().for_each(ProjectedSplat::drop_curves);
    }
    Ok(prepared)
}

/// One forward and backward pass: loss value, rendered tape and gradients.
pub fn loss_and_grad(scene: &Scene, target: &Image, cfg: &FitConfig) -> Result<(f64, RenderTape, GradientBuffer)> {
    let params = cfg.raster();
    let prepared = prepare_fit(scene, target.width, target.height, cfg)?;
    let tape = render(&prepared, target.width, target.height, scene.background, &params);
    let (value, d_image) = loss::loss(&tape.image, target, cfg.lambda_ssim)?;
    let grads = backward(
        scene,
        &prepared,
        &tape,
        &d_image,
        &BackwardOptions {
            curves: !cfg.freeze_curves,
        },
    )?;
    Ok((value, tape, grads))
}

/// Learning rate of every slot of the packed parameter vector.
pub fn learning_rates(cfg: &FitConfig, width: usize, height: usize) -> [f64; 6] {
    let spatial = cfg
        .spatial_lr_scale
        .unwrap_or(width.max(height) as f64);
    GROUPS.map(|g| match g {
        Group::Center => cfg.lr_center * spatial,
        Group::Theta => cfg.lr_theta,
        Group::LogScales => cfg.lr_log_scales,
        Group::RawOpacity => cfg.lr_raw_opacity,
        Group::Color => cfg.lr_color,
        Group::Curve if cfg.freeze_curves => 0.0,
        Group::Curve => cfg.lr_c_curve * spatial,
    })
}

fn group_index(g: Group) -> usize {
    GROUPS.iter().position(|&x| x == g).expect("listed group")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DensifyOutcome {
    pub cloned: usize,
    pub pruned: usize,
}

/// Clones splats whose mean center-gradient norm exceeds the threshold and
/// prunes nearly transparent ones.
///
/// A clone copies every attribute, its curves included, moves its center by
/// `0.1 · max scale` in a random direction and takes a fresh depth key (it
/// blends behind every existing splat). Clones start with zero optimizer
/// moments.
pub fn densify(
    splats: &mut Vec<FlatSplat>,
    adam: &mut Adam,
    mean_center_grad: &[f64],
    cfg: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> DensifyOutcome {
    assert_eq!(mean_center_grad.len(), splats.len());
    let Some(first) = splats.first() else {
        return DensifyOutcome::default();
    };
    let p = stride(first.c_curve.len() / 4);
    let mut next_key = splats.iter().map(|s| s.depth_key).fold(f64::MIN, f64::max) + 1.0;
    let mut out = DensifyOutcome::default();

    let room = cfg.max_splats.saturating_sub(splats.len());
    let mut clones = Vec::new();
    for (s, &g) in splats.iter().zip(mean_center_grad) {
        if clones.len() >= room {
            break;
        }
        if g > cfg.densify_grad_threshold {
            let mut c = s.clone();
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = 0.1 * s.scales()[0].max(s.scales()[1]);
            c.center += Vec2::new(angle.cos(), angle.sin()) * r;
            c.depth_key = next_key;
            next_key += 1.0;
            clones.push(c);
        }
    }
    out.cloned = clones.len();
    adam.push_zero_rows(p, clones.len());
    splats.extend(clones);

    let keep: Vec<bool> = splats
        .iter()
        .map(|s| sigmoid(s.raw_opacity) >= cfg.prune_alpha)
        .collect();
    out.pruned = keep.iter().filter(|k| !**k).count();
    if out.pruned > 0 {
        adam.retain_rows(p, &keep);
        let mut it = keep.iter();
        splats.retain(|_| *it.next().expect("one flag per splat"));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub splats: usize,
    /// Seconds since the fit started. Not written to the CSV, which must be
    /// reproducible.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    pub checkpoints: Vec<Checkpoint>,
    pub scene_path: Option<String>,
}

impl FitReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss,psnr,ssim,splats\n");
        for c in &self.checkpoints {
            s.push_str(&format!(
                "{},{:.9},{:.6},{:.6},{}\n",
                c.iteration, c.loss, c.psnr, c.ssim, c.splats
            ));
        }
        s
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        if let Some(c) = self.last() {
            s.push_str(&format!(
                "iterations {}\nsplats {}\nloss {:.6}\npsnr {:.3} dB\nssim {:.4}\n",
                c.iteration, c.splats, c.loss, c.psnr, c.ssim
            ));
        }
        if let Some(p) = &self.scene_path {
            s.push_str(&format!("scene {p}\n"));
        }
        s
    }
}

pub struct FitOutcome {
    pub scene: Scene,
    pub report: FitReport,
    pub adam: Adam,
    /// Training loss before each update.
    pub losses: Vec<f64>,
    pub last_stats: BackwardStats,
    pub final_render: Image,
}

/// Fits `cfg.splats` splats to `target`, starting from [`init_scene`] with
/// `cfg.seed` unless a scene is given. `on_checkpoint` sees every checkpoint
/// with its render.
pub fn fit(
    target: &Image,
    cfg: &FitConfig,
    start: Option<Scene>,
    mut on_checkpoint: impl FnMut(&Checkpoint, &Image),
) -> Result<FitOutcome> {
    cfg.validate()?;
    let (w, h) = (target.width, target.height);
    let mut scene = match start {
        Some(s) => {
            s.validate()?;
            s
        }
        None => init_scene(w, h, cfg.splats, cfg.m, cfg.seed, Some(target))?,
    };
    if scene.m != cfg.m {
        return Err(Error::Config(format!("scene has M={} but config asks for {}", scene.m, cfg.m)));
    }
    let p = stride(scene.m);
    let lrs = learning_rates(cfg, w, h);
    let lr_of: Vec<f64> = (0..p).map(|o| lrs[group_index(group_of(o))]).collect();
    let mut params = pack(scene.flat()?);
    let mut adam = Adam::new(params.len(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_de75);
    let mut grad_sum = vec![0.0; scene.len()];
    let mut grad_count = 0usize;
    let mut report = FitReport::default();
    let mut losses = Vec::with_capacity(cfg.iters);
    let mut last_stats = BackwardStats::default();
    let started = Instant::now();

    let mut checkpoint = |scene: &Scene, iteration: usize, report: &mut FitReport| -> Result<Image> {
        let tape = render_scene(scene, w, h, cfg)?;
        let (l, _) = loss::loss(&tape.image, target, cfg.lambda_ssim)?;
        let (psnr, ssim) = loss::metrics(&tape.image, target)?;
        let c = Checkpoint {
            iteration,
            loss: l,
            psnr,
            ssim,
            splats: scene.len(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_checkpoint(&c, &tape.image);
        report.checkpoints.push(c);
        Ok(tape.image)
    };

    let mut final_render = None;
    if cfg.iters == 0 {
        final_render = Some(checkpoint(&scene, 0, &mut report)?);
    }
    for it in 0..cfg.iters {
        if cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 {
            checkpoint(&scene, it, &mut report)?;
        }
        let (value, _, grads) = loss_and_grad(&scene, target, cfg)?;
        losses.push(value);
        last_stats = grads.stats;
        let flat_grads = pack_grads(&grads.splats);
        adam.update(&mut params, &flat_grads, |i| lr_of[i % p]);
        unpack(&params, scene.flat_mut()?);

        for (acc, g) in grad_sum.iter_mut().zip(&grads.splats) {
            *acc += g.d_center.norm();
        }
        grad_count += 1;
        let done = it + 1;
        if cfg.densify_interval > 0 && done % cfg.densify_interval == 0 && done < cfg.iters {
            let mean: Vec<f64> = grad_sum.iter().map(|s| s / grad_count as f64).collect();
            densify(scene.flat_mut()?, &mut adam, &mean, cfg, &mut rng);
            params = pack(scene.flat()?);
            grad_sum = vec![0.0; scene.len()];
            grad_count = 0;
        }
        if done == cfg.iters {
            final_render = Some(checkpoint(&scene, done, &mut report)?);
        }
    }

    Ok(FitOutcome {
        scene,
        report,
        adam,
        losses,
        last_stats,
        final_render: final_render.expect("final checkpoint"),
    })
}
