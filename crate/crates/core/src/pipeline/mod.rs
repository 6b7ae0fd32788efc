//! Deterministic image transforms matching the processing parameter grids,
//! plus center masking used to suppress semantic content.

mod classes;
mod jitter;
mod jpeg;
mod mask;
mod process;
mod resample;
mod sharpen;

pub use classes::{Processed, ProcessingClass};
pub use jitter::{sample_jitters, ResizeJitter, MAX_JITTER_PERCENT};
pub use jpeg::{apply_jpeg, detect_chroma, sof_components, Chroma, ComponentSampling, JPEG_QUALITIES};
pub use mask::{apply_center_mask, masked_fraction, MaskSpec};
pub use process::{process_manifest, read_ledger, write_ledger, LedgerEntry, ProcessRequest};
pub use resample::{apply_interp_resize, apply_resize, resample_plane, resize_rgb, scaled_dim, Interpolation, RESIZE_FACTORS};
pub use sharpen::{apply_sharpen, blur_plane, gaussian_kernel, SHARPEN_SIGMA};

pub use image::RgbImage;
