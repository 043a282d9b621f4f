use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vision::Image;

/// Bilinear resize using pixel-center alignment; edges clamp.
pub fn standardize(img: &Image, target_w: usize, target_h: usize) -> Result<Image> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::param("target dimensions must be positive"));
    }
    let (w, h) = (img.width(), img.height());
    if (w, h) == (target_w, target_h) {
        return Ok(img.clone());
    }
    let sx = w as f64 / target_w as f64;
    let sy = h as f64 / target_h as f64;
    let mut out = Vec::with_capacity(target_w * target_h);
    for ty in 0..target_h {
        let fy = ((ty as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for tx in 0..target_w {
            let fx = ((tx as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - wx) + img.get(x1, y0) * wx;
            let bottom = img.get(x0, y1) * (1.0 - wx) + img.get(x1, y1) * wx;
            out.push(top * (1.0 - wy) + bottom * wy);
        }
    }
    Ok(Image::from_clamped(target_w, target_h, out))
}

/// Integer shift; vacated pixels become 0.
pub fn translate(img: &Image, dx: i64, dy: i64) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            out.push(img.get_or_zero((x - dx) as isize, (y - dy) as isize));
        }
    }
    Image::from_clamped(w, h, out)
}

/// Rotation about the image center (counter-clockwise in image
/// coordinates), bilinear, zero fill.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 - cx, y as f64 - cy);
            let sx = c * u + s * v + cx;
            let sy = -s * u + c * v + cy;
            out.push(img.sample_zero_fill(sx, sy));
        }
    }
    Image::from_clamped(w, h, out)
}

/// Crops `[x, x + cw) × [y, y + ch)` (must lie inside the frame).
pub fn crop(img: &Image, x: usize, y: usize, cw: usize, ch: usize) -> Result<Image> {
    if cw == 0 || ch == 0 || x + cw > img.width() || y + ch > img.height() {
        return Err(Error::param(format!(
            "crop {cw}x{ch} at ({x}, {y}) outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut out = Vec::with_capacity(cw * ch);
    for yy in y..y + ch {
        for xx in x..x + cw {
            out.push(img.get(xx, yy));
        }
    }
    Image::new(cw, ch, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentParams {
    pub max_rotation_deg: f64,
    pub max_shift_px: u32,
    /// Area of the random crop relative to the frame; 1 disables cropping.
    pub crop_fraction: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_shift_px: 0,
            crop_fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::param(format!(
                "crop_fraction must be in (0, 1], got {}",
                self.crop_fraction
            )));
        }
        if !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg <= 180.0) {
            return Err(Error::param(format!(
                "max_rotation_deg must be in [0, 180], got {}",
                self.max_rotation_deg
            )));
        }
        Ok(())
    }
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_rotation_deg: 10.0,
            max_shift_px: 4,
            crop_fraction: 0.9,
        }
    }
}

/// Random rotation, then translation, then a crop of `crop_fraction` area
/// resized back to the original frame.
pub fn augment<R: Rng + ?Sized>(img: &Image, params: &AugmentParams, rng: &mut R) -> Result<Image> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let angle = if params.max_rotation_deg > 0.0 {
        rng.random_range(-params.max_rotation_deg..=params.max_rotation_deg)
    } else {
        0.0
    };
    let m = params.max_shift_px as i64;
    let (dx, dy) = if m > 0 {
        (rng.random_range(-m..=m), rng.random_range(-m..=m))
    } else {
        (0, 0)
    };
    let mut out = translate(&rotate(img, angle), dx, dy);
    if params.crop_fraction < 1.0 {
        let side = params.crop_fraction.sqrt();
        let cw = ((w as f64 * side).round() as usize).clamp(1, w);
        let ch = ((h as f64 * side).round() as usize).clamp(1, h);
        let x = rng.random_range(0..=w - cw);
        let y = rng.random_range(0..=h - ch);
        out = standardize(&crop(&out, x, y, cw, ch)?, w, h)?;
    }
    Ok(out)
}

/// Number of pixels `pepper_noise` blackens: `floor(fraction · n)`.
pub fn pepper_count(fraction: f64, n: usize) -> usize {
    // The epsilon keeps e.g. 0.29 · 100 from flooring to 28.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Sets exactly `floor(fraction · N)` distinct, uniformly chosen pixels to 0.
pub fn pepper_noise<R: Rng + ?Sized>(img: &Image, fraction: f64, rng: &mut R) -> Result<Image> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::param(format!("pepper fraction must be in [0, 1], got {fraction}")));
    }
    let n = img.pixels().len();
    let k = pepper_count(fraction, n).min(n);
    let mut out = img.clone();
    if k > 0 {
        let px = out.pixels_mut();
        for i in sample(rng, n, k) {
            px[i] = 0.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize) -> Image {
        Image::new(w, h, (0..w * h).map(|i| i as f64 / (w * h) as f64).collect()).unwrap()
    }

    #[test]
    fn resize_to_own_size_is_identity() {
        let img = ramp(5, 4);
        assert_eq!(standardize(&img, 5, 4).unwrap(), img);
    }

    #[test]
    fn two_by_two_to_one_is_mean() {
        let img = Image::new(2, 2, vec![0.1, 0.2, 0.3, 0.6]).unwrap();
        let out = standardize(&img, 1, 1).unwrap();
        assert!((out.pixels()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::filled(7, 3, 0.4);
        let out = standardize(&img, 11, 13).unwrap();
        assert!(out.pixels().iter().all(|&p| (p - 0.4).abs() < 1e-15));
    }

    #[test]
    fn identity_augmentation() {
        let img = ramp(8, 8);
        let out = augment(&img, &AugmentParams::identity(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn translation_moves_impulse() {
        let mut px = vec![0.0; 400];
        px[10 * 20 + 3] = 1.0;
        let img = Image::new(20, 20, px).unwrap();
        let out = translate(&img, 5, 0);
        assert_eq!(out.get(8, 10), 1.0);
        assert_eq!(out.pixels().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn augmentation_is_seeded_and_bounded() {
        let img = ramp(16, 16);
        let p = AugmentParams::default();
        let a = augment(&img, &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = augment(&img, &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (16, 16));
        assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn bad_crop_fraction() {
        let img = ramp(4, 4);
        for f in [0.0, -0.5, 1.5] {
            let p = AugmentParams {
                crop_fraction: f,
                ..AugmentParams::identity()
            };
            assert!(augment(&img, &p, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        }
    }

    #[test]
    fn rotation_by_ninety_degrees_maps_corners() {
        let mut px = vec![0.0; 9];
        px[0] = 1.0;
        let img = Image::new(3, 3, px).unwrap();
        let out = rotate(&img, 90.0);
        let lit: Vec<usize> = (0..9).filter(|&i| out.pixels()[i] > 0.99).collect();
        assert_eq!(lit.len(), 1);
        assert_ne!(lit[0], 0);
    }

    #[test]
    fn pepper_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = Image::filled(20, 20, 1.0);
        let out = pepper_noise(&img, 0.05, &mut rng).unwrap();
        assert_eq!(out.pixels().iter().filter(|&&p| p == 0.0).count(), 20);
        assert_eq!(pepper_noise(&img, 0.0, &mut rng).unwrap(), img);
        let small = Image::filled(10, 10, 0.5);
        let out = pepper_noise(&small, 0.97, &mut rng).unwrap();
        assert_eq!(out.pixels().iter().filter(|&&p| p == 0.0).count(), 97);
        assert!(out.pixels().iter().all(|&p| p == 0.0 || p == 0.5));
        assert!(pepper_noise(&img, 1.01, &mut rng).is_err());
    }

    #[test]
    fn pepper_floor_rule_is_exact_for_decimal_fractions() {
        for pct in 0..=100 {
            assert_eq!(pepper_count(pct as f64 / 100.0, 100), pct);
        }
    }
}
