//! Pressure snapshot files and their rendering to images.
//!
//! A frame file is a 32-byte little-endian header
//! `nx: u32, ny: u32, ds: f64, dt: f64, step: u64` followed by `nx·ny`
//! little-endian `f32` pressures in row-major order with one row per `j`
//! (the value of cell `(i, j)` is at position `j·nx + i`).

use std::io::{self, Read, Write};

use image::{Rgb, RgbImage};

use crate::scene::ObstacleMask;

pub const FRAME_HEADER_BYTES: usize = 32;

/// Color of rigid cells in rendered frames.
pub const OBSTACLE_COLOR: [u8; 3] = [96, 96, 96];

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub nx: usize,
    pub ny: usize,
    pub ds: f64,
    pub dt: f64,
    pub step: u64,
    /// x-major (`i·ny + j`), matching the solver's field layout.
    pub pressure: Vec<f32>,
}

impl Frame {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.pressure[i * self.ny + j]
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(&(self.nx as u32).to_le_bytes())?;
        out.write_all(&(self.ny as u32).to_le_bytes())?;
        out.write_all(&self.ds.to_le_bytes())?;
        out.write_all(&self.dt.to_le_bytes())?;
        out.write_all(&self.step.to_le_bytes())?;
        let mut row = Vec::with_capacity(self.nx * 4);
        for j in 0..self.ny {
            row.clear();
            for i in 0..self.nx {
                row.extend_from_slice(&self.at(i, j).to_le_bytes());
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> io::Result<Frame> {
        let mut header = [0u8; FRAME_HEADER_BYTES];
        input.read_exact(&mut header)?;
        let u32_at = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as usize;
        let f64_at = |k: usize| f64::from_le_bytes(header[k..k + 8].try_into().unwrap());
        let (nx, ny) = (u32_at(0), u32_at(4));
        let step = u64::from_le_bytes(header[24..32].try_into().unwrap());
        let mut raw = vec![0u8; nx * ny * 4];
        input.read_exact(&mut raw)?;
        let mut pressure = vec![0f32; nx * ny];
        for (k, chunk) in raw.chunks_exact(4).enumerate() {
            let (j, i) = (k / nx, k % nx);
            pressure[i * ny + j] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(Frame { nx, ny, ds: f64_at(8), dt: f64_at(16), step, pressure })
    }
}

/// Renders `|p|` normalized to the frame maximum through the turbo
/// colormap, obstacles in [`OBSTACLE_COLOR`], +y up. An all-zero frame
/// renders as uniform background.
pub fn snapshot_to_image(frame: &Frame, mask: &ObstacleMask) -> RgbImage {
    assert_eq!(mask.shape(), (frame.nx, frame.ny), "mask does not match frame");
    let peak = frame.pressure.iter().fold(0f32, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 1.0 / peak as f64 } else { 0.0 };
    RgbImage::from_fn(frame.nx as u32, frame.ny as u32, |x, y| {
        let (i, j) = (x as usize, frame.ny - 1 - y as usize);
        if !mask.is_free(i, j) {
            return Rgb(OBSTACLE_COLOR);
        }
        let level = (frame.at(i, j).abs() as f64 * scale).clamp(0.0, 1.0);
        let c = colorous::TURBO.eval_continuous(level);
        Rgb([c.r, c.g, c.b])
    })
}
