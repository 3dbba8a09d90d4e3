//! Distance-band images of the certified region, written as binary PPM.

use std::path::Path;

use bakerlab_core::{Complex64, MapModel};
use rayon::prelude::*;

use crate::CliError;

pub const INSIDE_EPSILON: [u8; 3] = [0, 0, 0];
pub const COLLAR: [u8; 3] = [128, 128, 128];
pub const CERTIFIED: [u8; 3] = [255, 255, 255];
pub const ORBIT: [u8; 3] = [220, 30, 30];
pub const LOOP: [u8; 3] = [30, 60, 220];

/// Axis-parallel region of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Viewport {
    pub fn from_array(v: [f64; 4]) -> Result<Self, CliError> {
        let [x_min, x_max, y_min, y_max] = v;
        if !(x_min < x_max && y_min < y_max) || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("degenerate viewport {v:?}")));
        }
        Ok(Viewport {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }
}

/// RGB image, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    viewport: Viewport,
}

impl Image {
    pub fn pixel(&self, col: u32, row: u32) -> [u8; 3] {
        let i = 3 * (row as usize * self.width as usize + col as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn count(&self, color: [u8; 3]) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p == color).count()
    }

    /// Pixel containing `z`, if visible.
    pub fn locate(&self, z: Complex64) -> Option<(u32, u32)> {
        let v = self.viewport;
        let fx = (z.re - v.x_min) / (v.x_max - v.x_min);
        let fy = (v.y_max - z.im) / (v.y_max - v.y_min);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * self.width as f64) as u32, (fy * self.height as f64) as u32))
    }

    /// Paints the pixels containing `points`.
    pub fn overlay(&mut self, points: impl IntoIterator<Item = Complex64>, color: [u8; 3]) {
        for z in points {
            if let Some((col, row)) = self.locate(z) {
                let i = 3 * (row as usize * self.width as usize + col as usize);
                self.pixels[i..i + 3].copy_from_slice(&color);
            }
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_ppm()).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Colours each pixel centre by its distance to the extended pole set:
/// black within `ε`, grey in the collar `[ε, δ)`, white in `Ṽ`.
pub fn render_region(model: &MapModel, viewport: Viewport, width: u32, height: u32) -> Result<Image, CliError> {
    if width == 0 || height == 0 {
        return Err(CliError::Config(format!("resolution must be positive, got {width}x{height}")));
    }
    let dx = (viewport.x_max - viewport.x_min) / width as f64;
    let dy = (viewport.y_max - viewport.y_min) / height as f64;
    let mut pixels = vec![0u8; 3 * width as usize * height as usize];
    pixels
        .par_chunks_mut(3 * width as usize)
        .enumerate()
        .for_each(|(row, line)| {
            let y = viewport.y_max - (row as f64 + 0.5) * dy;
            for (col, px) in line.chunks_exact_mut(3).enumerate() {
                let x = viewport.x_min + (col as f64 + 0.5) * dx;
                let (_, d) = model.dist_to_poles(Complex64::new(x, y));
                let color = if d < model.epsilon() {
                    INSIDE_EPSILON
                } else if d < model.delta() {
                    COLLAR
                } else {
                    CERTIFIED
                };
                px.copy_from_slice(&color);
            }
        });
    Ok(Image {
        width,
        height,
        pixels,
        viewport,
    })
}
