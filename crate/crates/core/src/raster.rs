//! Single-channel frames with intensities normalized to `[0, 1]`.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major grayscale frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

impl<T: Scalar> GrayFrame<T> {
    pub fn filled(width: u32, height: u32, value: T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!("empty frame {width}x{height}")));
        }
        Ok(Self { width, height, data: vec![value; width as usize * height as usize] })
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!("empty frame {width}x{height}")));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::Data(format!(
                "{} samples for a {width}x{height} frame",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: T) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn from_luma8(img: &GrayImage) -> Result<Self> {
        let inv = T::of(1.0 / 255.0);
        let data = img.as_raw().iter().map(|&b| T::of(b as f64) * inv).collect();
        Self::from_vec(img.width(), img.height(), data)
    }

    /// 8-bit quantization: `round(v * 255)` clamped to `[0, 255]`.
    pub fn to_luma8(&self) -> GrayImage {
        let scale = T::of(255.0);
        let raw = self
            .data
            .iter()
            .map(|&v| {
                let q = (v * scale).round();
                q.max(T::zero()).min(scale).to_u8().unwrap_or(0)
            })
            .collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer length matches dims")
    }

    /// Load any image the `image` crate can decode, converted to luma.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.to_luma8();
        Self::from_luma8(&img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_luma8().save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }

    /// Bilinear resampling with pixel-center alignment and edge clamping.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("resize target {width}x{height}")));
        }
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let sx = T::of(self.width as f64 / width as f64);
        let sy = T::of(self.height as f64 / height as f64);
        let half = T::of(0.5);
        let max_x = T::of((self.width - 1) as f64);
        let max_y = T::of((self.height - 1) as f64);
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            let fy = ((T::of(y as f64) + half) * sy - half).max(T::zero()).min(max_y);
            for x in 0..width {
                let fx = ((T::of(x as f64) + half) * sx - half).max(T::zero()).min(max_x);
                data.push(self.sample_clamped(fx, fy));
            }
        }
        Self::from_vec(width, height, data)
    }

    fn sample_clamped(&self, fx: T, fy: T) -> T {
        let x0 = fx.floor();
        let y0 = fy.floor();
        let ax = fx - x0;
        let ay = fy - y0;
        let x0 = x0.to_u32().unwrap_or(0);
        let y0 = y0.to_u32().unwrap_or(0);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = lerp(self.get(x0, y0), self.get(x1, y0), ax);
        let bottom = lerp(self.get(x0, y1), self.get(x1, y1), ax);
        lerp(top, bottom, ay)
    }
}

/// `a + (b - a) * t`; exact when `a == b` or `t == 0`.
#[inline]
pub(crate) fn lerp<T: Scalar>(a: T, b: T, t: T) -> T {
    a + (b - a) * t
}
