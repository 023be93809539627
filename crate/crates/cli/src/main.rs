use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use discsplat::check::{grad_check, implicit_check, solver_check, CheckReport};
use discsplat::fit::{fit, loss, FitConfig};
use discsplat::io::{load_png, save_png, write_f32_planar};
use discsplat::projection::Camera;
use discsplat::raster::{prepare, render, RasterParams};
use discsplat::scene::{Mode, Scene};
use discsplat::{Error, Result};

#[derive(Parser)]
#[command(name = "discsplat", version, about = "Gaussian splatting with Bezier scissor curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a flat scene to a PNG target.
    Fit(FitArgs),
    /// Render a scene to PNG.
    Render(RenderArgs),
    /// PSNR and SSIM of a render against a target.
    Eval {
        #[arg(long)]
        render: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Write the image-plane splats of a scene as JSON.
    Project {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
    /// Continuous gradients against finite differences.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        scenes: usize,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Implicit-form residual along sampled curves.
    ImplicitCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        curves: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Cubic solver against a bisection oracle.
    SolverCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20000)]
        cases: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    target: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML or JSON fit configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    splats: Option<usize>,
    #[arg(long)]
    curves: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep every curve in its non-cutting initial state.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Also write the unquantized render as planar f32.
    #[arg(long)]
    raw: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Io(_) => 2,
        Error::Config(_) => 3,
        Error::Mode(_) => 4,
        Error::Shape(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("DISCSPLAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("DISCSPLAT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

/// `Ok(false)` when a check ran but failed.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Fit(a) => cmd_fit(a).map(|()| true),
        Command::Render(a) => cmd_render(a).map(|()| true),
        Command::Eval { render, target } => {
            let a = load_png(&render)?;
            let b = load_png(&target)?;
            let (psnr, ssim) = loss::metrics(&a, &b)?;
            println!("psnr {psnr:.4}");
            println!("ssim {ssim:.6}");
            Ok(true)
        }
        Command::Project {
            scene,
            out,
            camera,
            width,
            height,
        } => cmd_project(&scene, &out, camera.as_deref(), width, height).map(|()| true),
        Command::GradCheck { seed, scenes, step, tol } => Ok(report(grad_check(seed, scenes, step, tol))),
        Command::ImplicitCheck {
            seed,
            curves,
            samples,
            tol,
        } => Ok(report(implicit_check(curves, samples, seed, tol))),
        Command::SolverCheck { seed, cases, tol } => Ok(report(solver_check(cases, seed, tol))),
    }
}

fn report(r: CheckReport) -> bool {
    println!("{r}");
    r.pass()
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let target = load_png(&a.target)?;
    let mut cfg = match &a.config {
        Some(p) => FitConfig::load(p)?,
        None => FitConfig::default(),
    };
    if let Some(n) = a.splats {
        cfg.splats = n;
    }
    if let Some(m) = a.curves {
        cfg.m = m;
    }
    if let Some(k) = a.iters {
        cfg.iters = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.freeze_curves |= a.baseline;
    cfg.validate()?;

    let checkpoints = a.out.join("checkpoints");
    fs::create_dir_all(&checkpoints)?;
    let mut write_err = None;
    let outcome = fit(&target, &cfg, None, |c, img| {
        let p = checkpoints.join(format!("iter_{:06}.png", c.iteration));
        if let Err(e) = save_png(img, &p) {
            write_err.get_or_insert(e);
        }
        eprintln!("iter {:>6}  loss {:.6}  psnr {:.3}  splats {}", c.iteration, c.loss, c.psnr, c.splats);
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let scene_path = a.out.join("scene.json");
    outcome.scene.save(&scene_path)?;
    fs::write(a.out.join("report.csv"), outcome.report.to_csv())?;
    fs::write(a.out.join("config.toml"), cfg.to_toml())?;
    save_png(&outcome.final_render, &a.out.join("final.png"))?;
    let mut report = outcome.report;
    report.scene_path = Some(scene_path.display().to_string());
    print!("{}", report.summary());
    Ok(())
}

/// Image size and camera for a scene: 3D modes need a camera and default to
/// its size, flat scenes need an explicit size and ignore any camera.
fn view_for(
    scene: &Scene,
    camera: Option<&Path>,
    width: Option<usize>,
    height: Option<usize>,
) -> Result<(Option<Camera>, usize, usize)> {
    let cam = match (scene.mode(), camera) {
        (Mode::Flat2d, Some(_)) => {
            eprintln!("warning: flat2d scene, ignoring --camera");
            None
        }
        (Mode::Flat2d, None) => None,
        (_, Some(p)) => Some(Camera::load(p)?),
        (m, None) => return Err(Error::Mode(format!("{m:?} scene needs --camera"))),
    };
    let w = width.or(cam.as_ref().map(|c| c.width));
    let h = height.or(cam.as_ref().map(|c| c.height));
    match (w, h) {
        (Some(w), Some(h)) if w > 0 && h > 0 => Ok((cam, w, h)),
        _ => Err(Error::Input("need a positive --width and --height".into())),
    }
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let scene = Scene::load(&a.scene)?;
    let (cam, w, h) = view_for(&scene, a.camera.as_deref(), a.width, a.height)?;
    let params = RasterParams::default();
    let prepared = prepare(&scene, cam.as_ref(), w, h, &params)?;
    let tape = render(&prepared, w, h, scene.background, &params);
    save_png(&tape.image, &a.out)?;
    if let Some(raw) = &a.raw {
        write_f32_planar(&tape.image, raw)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ProjectedRecord {
    source: usize,
    depth: f64,
    mean: [f64; 2],
    /// `[xx, xy, yy]`
    cov: [f64; 3],
    alpha: f64,
    color: [f64; 3],
    control_points: Vec<[f64; 2]>,
    bbox: [usize; 4],
}

#[derive(Serialize)]
struct ProjectedFile {
    width: usize,
    height: usize,
    #[serde(rename = "M")]
    m: usize,
    splats: Vec<ProjectedRecord>,
}

fn cmd_project(
    scene: &Path,
    out: &Path,
    camera: Option<&Path>,
    width: Option<usize>,
    height: Option<usize>,
) -> Result<()> {
    let scene = Scene::load(scene)?;
    let (cam, w, h) = view_for(&scene, camera, width, height)?;
    let prepared = prepare(&scene, cam.as_ref(), w, h, &RasterParams::default())?;
    let file = ProjectedFile {
        width: w,
        height: h,
        m: scene.m,
        splats: prepared
            .iter()
            .map(|p| ProjectedRecord {
                source: p.source,
                depth: p.depth,
                mean: [p.mu.x, p.mu.y],
                cov: [p.cov.xx, p.cov.xy, p.cov.yy],
                alpha: p.alpha,
                color: p.color,
                control_points: p.curve_points.iter().map(|q| [q.x, q.y]).collect(),
                bbox: p.bbox,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Input(e.to_string()))?;
    text.push('\n');
    fs::write(out, text)?;
    Ok(())
}
