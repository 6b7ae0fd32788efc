use serde::{Deserialize, Serialize};

use super::{
    apply_interp_resize, apply_jpeg, apply_resize, apply_sharpen, Chroma, Interpolation,
    ResizeJitter, RgbImage, JPEG_QUALITIES, RESIZE_FACTORS,
};
use crate::data::Family;
use crate::error::{Error, Result};

pub const SHARPEN_ALPHAS: [f64; 3] = [1.0, 2.0, 4.0];

/// One class of a processing family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ProcessingClass {
    Jpeg { quality: u8, chroma: Chroma },
    Sharpen { alpha: f64 },
    Resize { factor: f64 },
    Interp { method: Interpolation },
}

/// Result of applying a processing class.
#[derive(Debug, Clone)]
pub enum Processed {
    /// Encoded JPEG stream.
    Jpeg(Vec<u8>),
    /// Raster, stored losslessly.
    Raster(RgbImage),
}

impl Processed {
    pub fn extension(&self) -> &'static str {
        match self {
            Processed::Jpeg(_) => "jpg",
            Processed::Raster(_) => "png",
        }
    }

    /// File bytes: the JPEG stream, or a PNG encoding of the raster.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Processed::Jpeg(b) => Ok(b.clone()),
            Processed::Raster(img) => {
                use image::ImageEncoder;
                let mut out = Vec::new();
                image::codecs::png::PngEncoder::new(&mut out)
                    .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
                    .map_err(|e| Error::Image(format!("png encoding failed: {e}")))?;
                Ok(out)
            }
        }
    }
}

impl ProcessingClass {
    /// The classes of a processing family in canonical label order; empty
    /// for acquisition families.
    pub fn grid(family: Family) -> Vec<ProcessingClass> {
        match family {
            Family::Jpeg => JPEG_QUALITIES
                .iter()
                .flat_map(|&quality| {
                    [Chroma::Yuv420, Chroma::Yuv444]
                        .map(|chroma| ProcessingClass::Jpeg { quality, chroma })
                })
                .collect(),
            Family::Sharpening => SHARPEN_ALPHAS
                .iter()
                .map(|&alpha| ProcessingClass::Sharpen { alpha })
                .collect(),
            Family::Resizing => RESIZE_FACTORS
                .iter()
                .map(|&factor| ProcessingClass::Resize { factor })
                .collect(),
            Family::Interpolation => Interpolation::ALL
                .iter()
                .map(|&method| ProcessingClass::Interp { method })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ProcessingClass::Jpeg { .. } => Family::Jpeg,
            ProcessingClass::Sharpen { .. } => Family::Sharpening,
            ProcessingClass::Resize { .. } => Family::Resizing,
            ProcessingClass::Interp { .. } => Family::Interpolation,
        }
    }

    /// Class name as used in label spaces and output file names.
    pub fn name(&self) -> String {
        match self {
            ProcessingClass::Jpeg { quality, chroma } => format!("q{quality}-{}", chroma.code()),
            ProcessingClass::Sharpen { alpha } => format!("a{alpha}"),
            ProcessingClass::Resize { factor } => format!("{factor}x"),
            ProcessingClass::Interp { method } => method.name().to_owned(),
        }
    }

    pub fn needs_jitter(&self) -> bool {
        matches!(self, ProcessingClass::Interp { .. })
    }

    pub fn apply(&self, image: &RgbImage, jitter: Option<&ResizeJitter>) -> Result<Processed> {
        Ok(match *self {
            ProcessingClass::Jpeg { quality, chroma } => {
                Processed::Jpeg(apply_jpeg(image, quality, chroma)?)
            }
            ProcessingClass::Sharpen { alpha } => Processed::Raster(apply_sharpen(image, alpha)?),
            ProcessingClass::Resize { factor } => Processed::Raster(apply_resize(image, factor)?),
            ProcessingClass::Interp { method } => {
                let jitter = jitter.ok_or_else(|| {
                    Error::Validation("interpolation classes need a resize jitter".into())
                })?;
                Processed::Raster(apply_interp_resize(image, method, jitter)?)
            }
        })
    }
}
