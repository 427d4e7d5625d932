use crate::error::{Error, Result};

/// Raster image with values in `[0, 1]`, row-major from the top row,
/// channels interleaved. `channels` is 1 (gray) or 3 (RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let o = (y * self.width + x) * self.channels;
        &self.data[o..o + self.channels]
    }

    /// Pixel-centre coordinates in `[-1, 1]²`, `u` along the width and `v`
    /// along the height, in storage order.
    pub fn uv_grid(width: usize, height: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * width * height);
        for y in 0..height {
            let v = -1.0 + (2 * y + 1) as f64 / height as f64;
            for x in 0..width {
                out.push(-1.0 + (2 * x + 1) as f64 / width as f64);
                out.push(v);
            }
        }
        out
    }
}
