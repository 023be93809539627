//! RGB images in `[0, 1]`, PNG encoding and a raw float dump.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major RGB image with `f64` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Quantized to 8 bits per channel.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(quantize))
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{} bytes for a {width}x{height} RGB image",
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]].map(|v| v as f64 / 255.0))
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads any 8-bit PNG, dropping alpha.
pub fn load_png(path: &Path) -> Result<Image> {
    let img = image::open(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Image::from_rgb8(w as usize, h as usize, img.as_raw())
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
        .ok_or_else(|| Error::Shape("pixel buffer does not match image size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Planar little-endian `f32` dump: a header of `width`, `height` as `u32`,
/// then the R, G and B planes in row-major order.
pub fn write_f32_planar(img: &Image, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(8 + 12 * img.pixels.len());
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    for c in 0..3 {
        for p in &img.pixels {
            out.extend_from_slice(&(p[c] as f32).to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_f32_planar(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or_else(|| Error::Input(format!("{}: truncated float dump", path.display())))
    };
    let w = u32::from_le_bytes(word(0)?) as usize;
    let h = u32::from_le_bytes(word(1)?) as usize;
    if bytes.len() != 8 + 12 * w * h {
        return Err(Error::Input(format!(
            "{}: expected {} bytes for {w}x{h}",
            path.display(),
            8 + 12 * w * h
        )));
    }
    let mut img = Image::new(w, h, [0.0; 3]);
    for c in 0..3 {
        for i in 0..w * h {
            img.pixels[i][c] = f32::from_le_bytes(word(2 + c * w * h + i)?) as f64;
        }
    }
    Ok(img)
}
