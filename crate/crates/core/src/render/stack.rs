//! `ViewStack` tensors and the `.mvr` container.
//!
//! Layout: magic `MVR1`, then V, C, H, W as little-endian `u32`, then
//! V·C·H·W little-endian `f32` values ordered view, channel, row, column.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MVR_MAGIC: &[u8; 4] = b"MVR1";

/// V×C×H×W rendered feature images for one subject (H = W).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewStack {
    views: usize,
    channels: usize,
    size: usize,
    data: Vec<f32>,
}

impl ViewStack {
    pub fn new(views: usize, channels: usize, size: usize, data: Vec<f32>) -> Result<Self> {
        if views == 0 || channels == 0 || size == 0 {
            return Err(Error::Shape(format!(
                "view stack dimensions must be positive, got {views}×{channels}×{size}×{size}"
            )));
        }
        if data.len() != views * channels * size * size {
            return Err(Error::Shape(format!(
                "view stack data has {} values, expected {views}×{channels}×{size}×{size}",
                data.len()
            )));
        }
        Ok(Self {
            views,
            channels,
            size,
            data,
        })
    }

    pub fn zeros(views: usize, channels: usize, size: usize) -> Self {
        Self {
            views,
            channels,
            size,
            data: vec![0.0; views * channels * size * size],
        }
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Image height and width.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn view_len(&self) -> usize {
        self.channels * self.size * self.size
    }

    /// C×H×W block of view `v`.
    pub fn view(&self, v: usize) -> &[f32] {
        let n = self.view_len();
        &self.data[v * n..(v + 1) * n]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut [f32] {
        let n = self.view_len();
        &mut self.data[v * n..(v + 1) * n]
    }

    #[inline]
    pub fn get(&self, v: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((v * self.channels + c) * self.size + y) * self.size + x]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4);
        out.extend_from_slice(MVR_MAGIC);
        for d in [self.views, self.channels, self.size, self.size] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 20 || &bytes[..4] != MVR_MAGIC {
            return Err("missing MVR1 header".into());
        }
        let dim =
            |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (v, c, h, w) = (dim(0), dim(1), dim(2), dim(3));
        if h != w {
            return Err(format!("non-square images ({h}×{w}) are not supported"));
        }
        let count = v
            .checked_mul(c)
            .and_then(|n| n.checked_mul(h))
            .and_then(|n| n.checked_mul(w))
            .ok_or("dimension overflow")?;
        let body = &bytes[20..];
        if body.len() != count * 4 {
            return Err(format!(
                "expected {} payload bytes, found {}",
                count * 4,
                body.len()
            ));
        }
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(v, c, h, data).map_err(|e| e.to_string())
    }

    pub fn write_mvr(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read_mvr(path: &Path) -> Result<Self> {
        let bytes =
            fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Writes one 8-bit grayscale PNG per view and channel, each channel
    /// min-max normalized across all views. Returns the written paths.
    pub fn write_pngs(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        let plane = self.size * self.size;
        let mut written = Vec::with_capacity(self.views * self.channels);
        for c in 0..self.channels {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for v in 0..self.views {
                let start = (v * self.channels + c) * plane;
                for &x in &self.data[start..start + plane] {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
            let span = if hi > lo { hi - lo } else { 1.0 };
            for v in 0..self.views {
                let start = (v * self.channels + c) * plane;
                let pixels: Vec<u8> = self.data[start..start + plane]
                    .iter()
                    .map(|&x| (((x - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
                    .collect();
                let path = dir.join(format!("{stem}_v{v:02}_c{c}.png"));
                image::save_buffer(
                    &path,
                    &pixels,
                    self.size as u32,
                    self.size as u32,
                    image::ColorType::L8,
                )
                .map_err(|e| Error::Format {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
