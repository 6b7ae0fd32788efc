use serde::{Deserialize, Serialize};

use super::RgbImage;
use crate::error::{ensure, Result};

/// Fraction of the image area to black out around the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    ratio: f64,
}

impl MaskSpec {
    /// Ratios used in the shipped configurations.
    pub const SHIPPED: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];

    pub fn new(ratio: f64) -> Result<Self> {
        ensure!((0.0..=1.0).contains(&ratio), "mask ratio {ratio} is outside [0, 1]");
        Ok(MaskSpec { ratio })
    }

    pub fn ratio(self) -> f64 {
        self.ratio
    }

    /// Masked rectangle `(x0, y0, width, height)` for a `w × h` image. Each
    /// side is scaled by `√ratio`, keeping the image's aspect ratio.
    pub fn rect(self, w: u32, h: u32) -> (u32, u32, u32, u32) {
        let side = self.ratio.sqrt();
        let mw = ((f64::from(w) * side).round() as u32).min(w);
        let mh = ((f64::from(h) * side).round() as u32).min(h);
        ((w - mw) / 2, (h - mh) / 2, mw, mh)
    }
}

pub fn apply_center_mask(image: &RgbImage, spec: MaskSpec) -> RgbImage {
    let mut out = image.clone();
    let (x0, y0, mw, mh) = spec.rect(image.width(), image.height());
    for y in y0..y0 + mh {
        for x in x0..x0 + mw {
            out.put_pixel(x, y, image::Rgb([0, 0, 0]));
        }
    }
    out
}

/// Fraction of pixels the mask covers for a `w × h` image.
pub fn masked_fraction(spec: MaskSpec, w: u32, h: u32) -> f64 {
    let (_, _, mw, mh) = spec.rect(w, h);
    f64::from(mw) * f64::from(mh) / (f64::from(w) * f64::from(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]))
    }

    #[test]
    fn zero_is_identity_and_one_is_black() {
        let img = white(20, 11);
        assert_eq!(apply_center_mask(&img, MaskSpec::new(0.0).unwrap()), img);
        let black = apply_center_mask(&img, MaskSpec::new(1.0).unwrap());
        assert!(black.pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn quarter_mask_is_centered_square() {
        let out = apply_center_mask(&white(100, 100), MaskSpec::new(0.25).unwrap());
        for y in 0..100 {
            for x in 0..100 {
                let inside = (25..75).contains(&x) && (25..75).contains(&y);
                assert_eq!(out.get_pixel(x, y).0 == [0, 0, 0], inside, "({x},{y})");
            }
        }
    }

    #[test]
    fn out_of_range_ratio_rejected() {
        assert!(MaskSpec::new(1.5).is_err());
        assert!(MaskSpec::new(-0.1).is_err());
    }
}
