//! Acquisition metadata: binning raw Exif values into label spaces, the
//! smartphone / dedicated-camera split, photographer-disjoint splits and a
//! best-effort Exif reader for JPEG files.

mod binning;
mod reader;
mod smart;
mod split;

pub use binning::{bin_exif, parse_numeric, Bin, Binned, BinningConfig, Matcher, NUMERIC_TOLERANCE};
pub use reader::{fill_missing_exif, read_jpeg_tags};
pub use smart::{derive_smart_vs_nonsmart, NON_SMART_MAKERS, SMART_MAKERS};
pub use split::{
    build_acquisition_split, AcquisitionLabeler, AcquisitionSplit, ClassAudit, SplitAudit,
    SplitEntry, SplitProvenance, SplitRule, TrainRule,
};
