//! Audits frozen visual-encoder embeddings for traces of image processing
//! (JPEG settings, sharpening, resizing, interpolation) and image acquisition
//! (camera make/model, exposure, aperture, ISO, focal length) metadata.
//!
//! The crate is organised around a small binary embedding format
//! ([`data`]), deterministic image transforms ([`pipeline`]), Exif binning
//! and photographer-disjoint splits ([`exif`]), metadata assignment plans
//! ([`plan`]) and three evaluation engines: cosine kNN under counterfactual
//! plans ([`knn`]), linear probes ([`probe`]) and paired retrieval
//! ([`retrieval`]). [`report`] ties them into runnable experiments.

pub mod data;
pub mod error;
pub mod exif;
pub mod knn;
pub mod pipeline;
pub mod plan;
pub mod probe;
pub mod report;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};

/// Version string embedded in report provenance.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
