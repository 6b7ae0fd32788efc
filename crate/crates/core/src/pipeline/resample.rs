//! Separable convolution resampling.
//!
//! Coefficients follow the Pillow construction: the kernel support is
//! widened by the scale factor when downsampling, weights are evaluated at
//! pixel centers and renormalised per output pixel, and the horizontal pass
//! runs before the vertical one. Arithmetic stays in `f64` until the final
//! rounding to 8 bits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ResizeJitter, RgbImage};
use crate::error::{ensure, Result};

pub const RESIZE_FACTORS: [f64; 3] = [1.0, 0.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Bilinear,
    Bicubic,
    Lanczos,
    Box,
}

impl Interpolation {
    pub const ALL: [Interpolation; 4] = [
        Interpolation::Bilinear,
        Interpolation::Bicubic,
        Interpolation::Lanczos,
        Interpolation::Box,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Bilinear => "bilinear",
            Interpolation::Bicubic => "bicubic",
            Interpolation::Lanczos => "lanczos",
            Interpolation::Box => "box",
        }
    }

    fn support(self) -> f64 {
        match self {
            Interpolation::Box => 0.5,
            Interpolation::Bilinear => 1.0,
            Interpolation::Bicubic => 2.0,
            Interpolation::Lanczos => 3.0,
        }
    }

    fn weight(self, x: f64) -> f64 {
        match self {
            Interpolation::Box => {
                if x > -0.5 && x <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Interpolation::Bilinear => {
                let x = x.abs();
                if x < 1.0 {
                    1.0 - x
                } else {
                    0.0
                }
            }
            Interpolation::Bicubic => {
                const A: f64 = -0.5;
                let x = x.abs();
                if x < 1.0 {
                    ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    (((x - 5.0) * x + 8.0) * x - 4.0) * A
                } else {
                    0.0
                }
            }
            Interpolation::Lanczos => {
                if (-3.0..3.0).contains(&x) {
                    sinc(x) * sinc(x / 3.0)
                } else {
                    0.0
                }
            }
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let x = x * PI;
        x.sin() / x
    }
}

/// Per output sample: first contributing input index and its weights.
fn coefficients(in_size: usize, out_size: usize, filter: Interpolation) -> Vec<(usize, Vec<f64>)> {
    let scale = in_size as f64 / out_size as f64;
    let filterscale = scale.max(1.0);
    let support = filter.support() * filterscale;
    (0..out_size)
        .map(|xx| {
            let center = (xx as f64 + 0.5) * scale;
            // truncation toward zero, then clamped at zero
            let xmin = ((center - support + 0.5) as i64).max(0) as usize;
            let xmax = ((center + support + 0.5) as i64).min(in_size as i64) as usize;
            let mut w: Vec<f64> = (xmin..xmax)
                .map(|x| filter.weight((x as f64 - center + 0.5) / filterscale))
                .collect();
            let total: f64 = w.iter().sum();
            if total != 0.0 {
                w.iter_mut().for_each(|v| *v /= total);
            }
            (xmin, w)
        })
        .collect()
}

/// Resamples a single-channel row-major plane.
pub fn resample_plane(
    plane: &[f64],
    width: usize,
    height: usize,
    out_width: usize,
    out_height: usize,
    filter: Interpolation,
) -> Vec<f64> {
    assert_eq!(plane.len(), width * height, "plane size mismatch");
    let mut current = plane.to_vec();
    let mut cur_w = width;
    if out_width != width {
        let coeffs = coefficients(width, out_width, filter);
        let mut next = vec![0.0; out_width * height];
        for y in 0..height {
            let row = &current[y * width..(y + 1) * width];
            for (x, (start, w)) in coeffs.iter().enumerate() {
                next[y * out_width + x] = w.iter().zip(&row[*start..]).map(|(a, b)| a * b).sum();
            }
        }
        current = next;
        cur_w = out_width;
    }
    if out_height != height {
        let coeffs = coefficients(height, out_height, filter);
        let mut next = vec![0.0; cur_w * out_height];
        for (y, (start, w)) in coeffs.iter().enumerate() {
            for x in 0..cur_w {
                next[y * cur_w + x] = w
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * current[(start + i) * cur_w + x])
                    .sum();
            }
        }
        current = next;
    }
    current
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

pub(crate) fn split_planes(image: &RgbImage) -> [Vec<f64>; 3] {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for p in planes.iter_mut() {
        p.reserve(image.as_raw().len() / 3);
    }
    for px in image.as_raw().chunks_exact(3) {
        for c in 0..3 {
            planes[c].push(f64::from(px[c]));
        }
    }
    planes
}

pub(crate) fn merge_planes(planes: &[Vec<f64>; 3], width: u32, height: u32) -> RgbImage {
    let raw: Vec<u8> = (0..planes[0].len())
        .flat_map(|i| [to_u8(planes[0][i]), to_u8(planes[1][i]), to_u8(planes[2][i])])
        .collect();
    RgbImage::from_raw(width, height, raw).expect("plane sizes match the output dims")
}

/// Resizes to exactly `width × height`. Same-size requests return a copy.
pub fn resize_rgb(image: &RgbImage, width: u32, height: u32, filter: Interpolation) -> Result<RgbImage> {
    ensure!(width > 0 && height > 0, "degenerate output size {width}×{height}");
    let (w, h) = image.dimensions();
    ensure!(w > 0 && h > 0, "cannot resize an empty image");
    if (w, h) == (width, height) {
        return Ok(image.clone());
    }
    let planes = split_planes(image);
    let out = planes.map(|p| {
        resample_plane(&p, w as usize, h as usize, width as usize, height as usize, filter)
    });
    Ok(merge_planes(&out, width, height))
}

/// `round(size · factor)` with halves rounded away from zero.
pub fn scaled_dim(size: u32, factor: f64) -> u32 {
    (f64::from(size) * factor).round() as u32
}

/// Rescales both sides by `factor` ∈ {1, 0.5, 2} with bilinear weights.
pub fn apply_resize(image: &RgbImage, factor: f64) -> Result<RgbImage> {
    ensure!(
        RESIZE_FACTORS.contains(&factor),
        "resize factor {factor} is not one of {RESIZE_FACTORS:?}"
    );
    let (w, h) = image.dimensions();
    let (nw, nh) = (scaled_dim(w, factor), scaled_dim(h, factor));
    ensure!(nw >= 1 && nh >= 1, "resizing {w}×{h} by {factor} degenerates");
    resize_rgb(image, nw, nh, Interpolation::Bilinear)
}

/// Rescales both sides by `1 + r/100` with the given kernel. The jitter `r`
/// is per image and shared by every interpolation class of that image.
pub fn apply_interp_resize(
    image: &RgbImage,
    method: Interpolation,
    jitter: &ResizeJitter,
) -> Result<RgbImage> {
    let factor = 1.0 + jitter.percent() / 100.0;
    let (w, h) = image.dimensions();
    let (nw, nh) = (scaled_dim(w, factor), scaled_dim(h, factor));
    ensure!(
        nw >= 1 && nh >= 1,
        "jitter {}% degenerates a {w}×{h} image",
        jitter.percent()
    );
    resize_rgb(image, nw, nh, method)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for f in Interpolation::ALL {
            for (inn, out) in [(8, 9), (8, 6), (100, 50), (3, 7)] {
                for (_, w) in coefficients(inn, out, f) {
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{f:?} {inn}->{out}");
                }
            }
        }
    }

    #[test]
    fn factor_one_is_identity_and_halving_halves() {
        let img = RgbImage::from_fn(100, 60, |x, y| image::Rgb([x as u8, y as u8, 7]));
        assert_eq!(apply_resize(&img, 1.0).unwrap(), img);
        assert_eq!(apply_resize(&img, 0.5).unwrap().dimensions(), (50, 30));
        assert_eq!(apply_resize(&img, 2.0).unwrap().dimensions(), (200, 120));
        assert!(apply_resize(&img, 3.0).is_err());
    }

    #[test]
    fn degenerate_sizes_fail() {
        assert!(apply_resize(&RgbImage::new(0, 4), 2.0).is_err());
        assert!(apply_resize(&RgbImage::new(4, 4), 0.3).is_err());
        assert_eq!(apply_resize(&RgbImage::new(1, 1), 0.5).unwrap().dimensions(), (1, 1));
    }

    #[test]
    fn jitter_dims() {
        let img = RgbImage::new(100, 100);
        let j = ResizeJitter::new("a", -20.0).unwrap();
        for m in Interpolation::ALL {
            assert_eq!(apply_interp_resize(&img, m, &j).unwrap().dimensions(), (80, 80));
        }
        let zero = ResizeJitter::new("a", 0.0).unwrap();
        let img = RgbImage::from_fn(13, 7, |x, y| image::Rgb([x as u8, y as u8, 1]));
        assert_eq!(
            apply_interp_resize(&img, Interpolation::Bilinear, &zero).unwrap(),
            img
        );
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(scaled_dim(5, 0.5), 3);
        assert_eq!(scaled_dim(3, 0.5), 2);
        assert_eq!(scaled_dim(8, 1.1), 9);
    }
}
