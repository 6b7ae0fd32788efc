use super::resample::{merge_planes, split_planes};
use super::RgbImage;
use crate::error::{ensure, Result};

/// Standard deviation of the unsharp-mask blur, in pixels.
pub const SHARPEN_SIGMA: f64 = 2.0;

/// Normalised Gaussian taps over `[-r, r]` with `r = ⌈4σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-0.5 * (x as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Half-sample symmetric reflection: `d c b a | a b c d | d c b a`.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Separable convolution of a row-major plane with a symmetric kernel,
/// reflecting at the borders.
pub fn blur_plane(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    assert_eq!(plane.len(), width * height, "plane size mismatch");
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(x as i64 + k as i64 - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(y as i64 + k as i64 - r, height) * width + x])
                .sum();
        }
    }
    out
}

/// Unsharp mask `α·I + (1 − α)·blur(I)`, clamped to `[0, 255]`.
pub fn apply_sharpen(image: &RgbImage, alpha: f64) -> Result<RgbImage> {
    ensure!(alpha >= 1.0 && alpha.is_finite(), "sharpening alpha must be ≥ 1, got {alpha}");
    let (w, h) = image.dimensions();
    ensure!(w > 0 && h > 0, "cannot sharpen an empty image");
    let kernel = gaussian_kernel(SHARPEN_SIGMA);
    let planes = split_planes(image).map(|p| {
        let blurred = blur_plane(&p, w as usize, h as usize, &kernel);
        p.iter()
            .zip(&blurred)
            .map(|(v, b)| alpha * v + (1.0 - alpha) * b)
            .collect::<Vec<f64>>()
    });
    Ok(merge_planes(&planes, w, h))
}
