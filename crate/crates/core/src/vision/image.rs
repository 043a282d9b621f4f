use crate::error::{Error, Result};

/// Grayscale image with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::dim(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    /// Builds from any values, clamping into `[0, 1]`.
    pub(crate) fn from_clamped(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        Self {
            width,
            height,
            pixels: pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup returning 0 outside the frame.
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            0.0
        } else {
            self.pixels[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear sample with zero fill beyond the frame.
    pub fn sample_zero_fill(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let p00 = self.get_or_zero(x0, y0);
        let p10 = self.get_or_zero(x0 + 1, y0);
        let p01 = self.get_or_zero(x0, y0 + 1);
        let p11 = self.get_or_zero(x0 + 1, y0 + 1);
        let top = p00 * (1.0 - fx) + p10 * fx;
        let bottom = p01 * (1.0 - fx) + p11 * fx;
        top * (1.0 - fy) + bottom * fy
    }
}
